//! Section header detection and splitting the body into sections.

use std::sync::LazyLock;

use log::debug;
use regex::Regex;

use crate::error::Result;
use crate::lexicon::{HeaderRules, Lexicons};
use crate::linguistic::{split_sentences, tokenize};
use crate::xml::{AnnotatedBook, Header, HeaderKind, Paragraph, Section, Token};

/// Header lines are at most this many characters long, not counting the
/// title that may follow a keyword and number.
pub const MAX_HEADER_CHARS: usize = 60;
/// Upper bound for a keyword header line including its title.
pub const MAX_TITLED_HEADER_CHARS: usize = 100;

static ROMAN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^M{0,3}(CM|CD|D?C{0,3})(XC|XL|L?X{0,3})(IX|IV|V?I{0,3})$").unwrap()
});
static BARE_ROMAN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([IVXLCDM]+)\.?$").unwrap());
static BARE_ARABIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([0-9]{1,4})\.?$").unwrap());

const UNITS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];
const UNIT_ORDINALS: [&str; 20] = [
    "zeroth", "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth",
    "ninth", "tenth", "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth",
    "sixteenth", "seventeenth", "eighteenth", "nineteenth",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];
const TEN_ORDINALS: [&str; 10] = [
    "", "", "twentieth", "thirtieth", "fortieth", "fiftieth", "sixtieth", "seventieth",
    "eightieth", "ninetieth",
];

fn spelled_word(word: &str) -> Option<u32> {
    let find = |table: &[&str]| table.iter().position(|w| *w == word).map(|i| i as u32);
    find(&UNITS).or_else(|| find(&UNIT_ORDINALS))
}

fn spelled_tens(word: &str) -> Option<u32> {
    let find = |table: &[&str]| {
        table
            .iter()
            .position(|w| !w.is_empty() && *w == word)
            .map(|i| i as u32 * 10)
    };
    find(&TENS).or_else(|| find(&TEN_ORDINALS))
}

/// Spelled cardinals and ordinals from one to one hundred.
fn parse_spelled(text: &str) -> Option<u32> {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| c == '-' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .collect();
    let n = match words.as_slice() {
        [w] if *w == "hundred" || *w == "hundredth" => 100,
        ["one", w] if *w == "hundred" || *w == "hundredth" => 100,
        [w] => spelled_word(w).or_else(|| spelled_tens(w))?,
        [t, u] => {
            let tens = spelled_tens(t).filter(|_| TENS.contains(t))?;
            let unit = spelled_word(u).filter(|&u| (1..10).contains(&u))?;
            tens + unit
        }
        _ => return None,
    };
    (n >= 1).then_some(n)
}

/// Parses an arabic (1 to 3999), strict roman, or spelled (1 to 100) number.
pub fn parse_header_number(text: &str) -> Option<u32> {
    let t = text.trim().trim_end_matches('.');
    if t.is_empty() {
        return None;
    }
    if t.bytes().all(|b| b.is_ascii_digit()) {
        return t.parse::<u32>().ok().filter(|n| (1..=3999).contains(n));
    }
    let upper = t.to_uppercase();
    if upper.bytes().all(|b| b"IVXLCDM".contains(&b)) {
        return ROMAN.is_match(&upper).then(|| roman_value(&upper));
    }
    let t = t
        .strip_prefix("the ")
        .or_else(|| t.strip_prefix("The "))
        .or_else(|| t.strip_prefix("THE "))
        .unwrap_or(t);
    parse_spelled(t)
}

fn roman_value(s: &str) -> u32 {
    let value = |c: u8| match c {
        b'I' => 1,
        b'V' => 5,
        b'X' => 10,
        b'L' => 50,
        b'C' => 100,
        b'D' => 500,
        _ => 1000,
    };
    let b = s.as_bytes();
    let mut total = 0i64;
    for i in 0..b.len() {
        let v = value(b[i]) as i64;
        if i + 1 < b.len() && v < value(b[i + 1]) as i64 {
            total -= v;
        } else {
            total += v;
        }
    }
    total as u32
}

fn keyword_pattern(rules: &HeaderRules) -> Regex {
    let mut words: Vec<&str> = rules.keywords.iter().map(|(k, _)| k.as_str()).collect();
    words.sort_by_key(|w| std::cmp::Reverse(w.len()));
    let alternatives = words.iter().map(|w| regex::escape(w)).collect::<Vec<_>>().join("|");
    Regex::new(&format!(
        r"(?i)^({alternatives})\s+(the\s+[a-z]+(?:[- ][a-z]+)?|[a-z0-9]+(?:-[a-z]+)?)\s*(?:[.:—–-]+\s*(.*))?$"
    ))
    .unwrap()
}

fn classify(line: &str, rules: &HeaderRules, keywords: &Regex) -> Option<Header> {
    let text = line.trim();
    if text.is_empty() || text.chars().count() > MAX_TITLED_HEADER_CHARS {
        return None;
    }
    let header = |kind, number| Header {
        kind,
        number,
        raw_text: text.to_string(),
        char_offset: 0,
        trailing_ws: String::new(),
    };
    if let Some(caps) = keywords.captures(text) {
        let keyword = caps[1].to_lowercase();
        let kind = rules
            .keywords
            .iter()
            .find(|(k, _)| *k == keyword)
            .map(|(_, kind)| *kind)?;
        let number = parse_header_number(&caps[2])?;
        let head_len = caps.get(3).map_or(text.len(), |m| m.start());
        if text[..head_len].chars().count() > MAX_HEADER_CHARS {
            return None;
        }
        return Some(header(kind, Some(number)));
    }
    if text.chars().count() > MAX_HEADER_CHARS {
        return None;
    }
    if let Some(caps) = BARE_ROMAN.captures(text) {
        return parse_header_number(&caps[1]).map(|n| header(HeaderKind::Other, Some(n)));
    }
    if let Some(caps) = BARE_ARABIC.captures(text) {
        return parse_header_number(&caps[1]).map(|n| header(HeaderKind::Other, Some(n)));
    }
    let bare = text.trim_end_matches('.');
    if let Some(n) = parse_header_number(bare).filter(|_| bare.chars().all(|c| c.is_alphabetic() || c == '-' || c == ' ')) {
        return Some(header(HeaderKind::Other, Some(n)));
    }
    let word = bare.to_lowercase();
    if rules.unnumbered.contains(&word) {
        return Some(header(HeaderKind::Other, None));
    }
    None
}

/// Candidate header lines with their index and byte offset (lines joined by
/// `\n`). A candidate is a short line matching a header pattern, preceded by
/// a blank line or the start of the text and followed by a blank line, the end
/// of the text, or one short title line and then a blank line.
pub fn detect_headers(lines: &[&str], rules: &HeaderRules) -> Vec<(usize, Header)> {
    let keywords = keyword_pattern(rules);
    let blank = |i: usize| lines.get(i).is_none_or(|l| l.trim().is_empty());
    let mut offset = 0;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let line_offset = offset;
        offset += line.len() + 1;
        let before = i == 0 || blank(i - 1);
        let after = blank(i + 1)
            || (lines[i + 1].trim().chars().count() <= MAX_HEADER_CHARS && blank(i + 2));
        if !before || !after {
            continue;
        }
        if let Some(mut header) = classify(line, rules, &keywords) {
            header.char_offset = line_offset + (line.len() - line.trim_start().len());
            out.push((i, header));
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct Consistency {
    pub accepted: Vec<(usize, Header)>,
    pub warnings: Vec<String>,
}

/// Longest run of numbers starting at 1 where each step is +1 or +2, as
/// candidate positions. Ties go to the run that is earlier in the document.
fn longest_run(numbers: &[u32]) -> Vec<usize> {
    let n = numbers.len();
    // length of the longest run starting at i
    let mut best = vec![1usize; n];
    for i in (0..n).rev() {
        for j in i + 1..n {
            let step = numbers[j].wrapping_sub(numbers[i]);
            if (step == 1 || step == 2) && best[j] + 1 > best[i] {
                best[i] = best[j] + 1;
            }
        }
    }
    let Some(start) = (0..n)
        .filter(|&i| numbers[i] == 1)
        .max_by(|&a, &b| best[a].cmp(&best[b]).then(b.cmp(&a)))
    else {
        return Vec::new();
    };
    let mut run = vec![start];
    let mut i = start;
    while best[i] > 1 {
        let next = (i + 1..n)
            .find(|&j| {
                let step = numbers[j].wrapping_sub(numbers[i]);
                (step == 1 || step == 2) && best[j] + 1 == best[i]
            })
            .unwrap();
        run.push(next);
        i = next;
    }
    run
}

/// Keeps, per header kind, the longest consecutively numbered run starting at
/// 1 (one missing number is tolerated with a warning), plus unnumbered
/// candidates lying between accepted headers.
pub fn enforce_numbering_consistency(candidates: Vec<(usize, Header)>) -> Consistency {
    let mut keep = vec![false; candidates.len()];
    let mut warnings = Vec::new();
    let mut kinds: Vec<HeaderKind> = candidates
        .iter()
        .filter(|(_, h)| h.number.is_some())
        .map(|(_, h)| h.kind)
        .collect();
    kinds.sort();
    kinds.dedup();
    for kind in kinds {
        let members: Vec<usize> = (0..candidates.len())
            .filter(|&i| candidates[i].1.kind == kind && candidates[i].1.number.is_some())
            .collect();
        let numbers: Vec<u32> = members.iter().map(|&i| candidates[i].1.number.unwrap()).collect();
        let run = longest_run(&numbers);
        for pair in run.windows(2) {
            if numbers[pair[1]] == numbers[pair[0]] + 2 {
                let msg = format!("{} {} is missing", kind.as_str(), numbers[pair[0]] + 1);
                debug!("{msg}");
                warnings.push(msg);
            }
        }
        for r in run {
            keep[members[r]] = true;
        }
    }
    let first = keep.iter().position(|&k| k);
    let last = keep.iter().rposition(|&k| k);
    if let (Some(first), Some(last)) = (first, last) {
        for i in first..=last {
            if candidates[i].1.number.is_none() {
                keep[i] = true;
            }
        }
    }
    let accepted = candidates
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|((line, mut h), _)| {
            if h.number.is_none() {
                h.kind = HeaderKind::Other;
            }
            (line, h)
        })
        .collect();
    Consistency { accepted, warnings }
}

/// Body text split into sections of tokenized paragraphs.
#[derive(Debug, Clone, Default)]
pub struct Segmented {
    pub lead: String,
    pub sections: Vec<Section>,
    pub warnings: Vec<String>,
}

static PARAGRAPH_BREAK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n[^\S\n]*\n").unwrap());

/// Splits body text at accepted headers and tokenizes each section into
/// paragraphs and sentences. Token offsets are byte offsets into `text`, and
/// global indices run across the whole body.
pub fn segment_text(text: &str, lex: &Lexicons) -> Segmented {
    let lines: Vec<&str> = text.split('\n').collect();
    let candidates = detect_headers(&lines, &lex.header_rules);
    let Consistency { accepted, warnings } = enforce_numbering_consistency(candidates);
    let headers: Vec<Header> = accepted.into_iter().map(|(_, h)| h).collect();

    // regions: text before the first header, then text after each header line
    let mut regions: Vec<(Option<Header>, usize, usize)> = Vec::new();
    let first_start = headers.first().map_or(text.len(), |h| h.char_offset);
    regions.push((None, 0, first_start));
    for (k, h) in headers.iter().enumerate() {
        let start = h.char_offset + h.raw_text.len();
        let end = headers.get(k + 1).map_or(text.len(), |n| n.char_offset);
        regions.push((Some(h.clone()), start, end));
    }

    let mut lead = String::new();
    let mut sections = Vec::new();
    let mut next_index = 0;
    for (header, start, end) in regions {
        let region = &text[start..end];
        let mut tokens = tokenize(region, lex);
        let region_lead = &region[..tokens.first().map_or(region.len(), |t| t.char_offset)];
        if header.is_none() {
            lead.push_str(region_lead);
        }
        let mut header = header;
        if let Some(h) = header.as_mut() {
            h.trailing_ws = region_lead.to_string();
        }
        for t in &mut tokens {
            t.char_offset += start;
            t.global_index = next_index;
            next_index += 1;
        }
        if header.is_none() && tokens.is_empty() {
            continue;
        }
        sections.push(Section {
            header,
            paragraphs: paragraphs(tokens),
        });
    }
    Segmented {
        lead,
        sections,
        warnings,
    }
}

fn paragraphs(tokens: Vec<Token>) -> Vec<Paragraph> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for token in tokens {
        let breaks = PARAGRAPH_BREAK.is_match(&token.trailing_ws);
        current.push(token);
        if breaks {
            out.push(Paragraph {
                sentences: split_sentences(std::mem::take(&mut current)),
            });
        }
    }
    if !current.is_empty() {
        out.push(Paragraph {
            sentences: split_sentences(current),
        });
    }
    out
}

/// Replaces the book's unsegmented body text with sections.
pub fn segment_book(book: &mut AnnotatedBook, lex: &Lexicons) -> Result<Vec<String>> {
    let Some(text) = book.body.text.take() else {
        return Ok(Vec::new());
    };
    let original_lead = std::mem::take(&mut book.body.lead);
    let seg = segment_text(&text, lex);
    book.body.lead = original_lead + &seg.lead;
    book.body.sections = seg.sections;
    Ok(seg.warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> &'static HeaderRules {
        &Lexicons::bundled().header_rules
    }

    fn detect_one(line: &str) -> Option<Header> {
        detect_headers(&[line], rules()).pop().map(|(_, h)| h)
    }

    #[test]
    fn header_patterns() {
        let h = detect_one("CHAPTER I.").unwrap();
        assert_eq!((h.kind, h.number), (HeaderKind::Chapter, Some(1)));
        assert!(detect_one("It was the best of times").is_none());
        let h = detect_one("XLII").unwrap();
        assert_eq!((h.kind, h.number), (HeaderKind::Other, Some(42)));
        let h = detect_one("CHAPTER 1. Loomings.").unwrap();
        assert_eq!(h.number, Some(1));
        let h = detect_one("Chapter the First").unwrap();
        assert_eq!((h.kind, h.number), (HeaderKind::Chapter, Some(1)));
        let h = detect_one("TWENTY-THREE").unwrap();
        assert_eq!(h.number, Some(23));
        let h = detect_one("BOOK II: The Fall").unwrap();
        assert_eq!((h.kind, h.number), (HeaderKind::Book, Some(2)));
        let h = detect_one("Chap. 4").unwrap();
        assert_eq!(h.kind, HeaderKind::Chapter);
        assert!(detect_one("Part of the problem").is_none());
        let h = detect_one("EPILOGUE").unwrap();
        assert_eq!((h.kind, h.number), (HeaderKind::Other, None));
        assert!(detect_one(&format!("CHAPTER I. {}", "x".repeat(60))).is_some());
        assert!(detect_one(&format!("CHAPTER I. {}", "x".repeat(90))).is_none());
        assert!(detect_one(&format!("XIV {}", "x".repeat(60))).is_none());
    }

    #[test]
    fn headers_need_blank_surroundings() {
        let lines = ["prose line", "CHAPTER I", "more prose"];
        assert!(detect_headers(&lines, rules()).is_empty());
        let lines = ["prose line", "", "CHAPTER I", "", "more prose"];
        assert_eq!(detect_headers(&lines, rules()).len(), 1);
        let lines = ["", "CHAPTER I", "Down the Rabbit-Hole", "", "prose"];
        assert_eq!(detect_headers(&lines, rules()).len(), 1);
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_header_number("XIV"), Some(14));
        assert_eq!(parse_header_number("TWENTY-THREE"), Some(23));
        assert_eq!(parse_header_number("IIII"), None);
        assert_eq!(parse_header_number("MMMCMXCIX"), Some(3999));
        assert_eq!(parse_header_number("4000"), None);
        assert_eq!(parse_header_number("0"), None);
        assert_eq!(parse_header_number("the first"), Some(1));
        assert_eq!(parse_header_number("twenty third"), Some(23));
        assert_eq!(parse_header_number("Ninety-Ninth"), Some(99));
        assert_eq!(parse_header_number("one hundred"), Some(100));
        assert_eq!(parse_header_number("twenty-zero"), None);
        assert_eq!(parse_header_number("fish"), None);
    }

    fn numbered(ns: &[u32]) -> Vec<(usize, Header)> {
        ns.iter()
            .enumerate()
            .map(|(i, &n)| {
                (
                    i,
                    Header {
                        kind: HeaderKind::Chapter,
                        number: Some(n),
                        raw_text: format!("CHAPTER {n}"),
                        char_offset: i,
                        trailing_ws: String::new(),
                    },
                )
            })
            .collect()
    }

    fn accepted(ns: &[u32]) -> (Vec<u32>, usize) {
        let c = enforce_numbering_consistency(numbered(ns));
        (
            c.accepted.iter().map(|(_, h)| h.number.unwrap()).collect(),
            c.warnings.len(),
        )
    }

    #[test]
    fn numbering_runs() {
        assert_eq!(accepted(&[1, 2, 3, 4]), (vec![1, 2, 3, 4], 0));
        assert_eq!(accepted(&[1, 2, 4]), (vec![1, 2, 4], 1));
        assert_eq!(accepted(&[7, 1, 2, 3]), (vec![1, 2, 3], 0));
        assert_eq!(accepted(&[1, 2, 5, 6]), (vec![1, 2], 0));
        assert_eq!(accepted(&[2, 3, 4]), (vec![], 0));
    }

    #[test]
    fn segments_reconstruct_text() {
        let text = "\n  Opening words.\n\n    CHAPTER I\n\nIt began. Then\nmore.\n\nNew para.\n\nCHAPTER II\n\nEnd.\n";
        let lex = Lexicons::bundled();
        let seg = segment_text(text, lex);
        assert_eq!(seg.sections.len(), 3);
        assert!(seg.sections[0].header.is_none());
        assert_eq!(seg.sections[1].paragraphs.len(), 2);
        let mut book = AnnotatedBook::default();
        book.body.text = Some(text.to_string());
        segment_book(&mut book, lex).unwrap();
        assert_eq!(book.reconstruct_body_text(), text);
        for t in book.tokens() {
            assert_eq!(&text[t.char_offset..t.char_offset + t.text.len()], t.text);
        }
    }

    #[test]
    fn leading_header_has_no_empty_section() {
        let text = "CHAPTER I\n\nIt began.\n\nCHAPTER II\n\nIt ended.";
        let seg = segment_text(text, Lexicons::bundled());
        assert_eq!(seg.sections.len(), 2);
        assert!(seg.lead.is_empty());
    }
}
