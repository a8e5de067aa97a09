//! Tokenization, sentence splitting, tagging, lemmas, syllables and quotes.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use log::debug;
use regex::Regex;

use crate::error::{Error, Result};
use crate::lexicon::Lexicons;
use crate::xml::{AnnotatedBook, Ner, Paragraph, Pos, Sentence, Token};

static WORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[\p{L}\p{N}]+(?:['’][\p{L}]+)*(?:-[\p{L}\p{N}]+(?:['’][\p{L}]+)*)*").unwrap()
});
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\p{N}+(?:[.,]\p{N}+)+").unwrap());
static DASH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:[—―]+|-{2,})").unwrap());

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits `text` into tokens with byte offsets and the whitespace that
/// follows each one. Global indices count from zero.
pub fn tokenize(text: &str, lex: &Lexicons) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    let mut pos = 0;
    let bytes_len = text.len();
    while pos < bytes_len {
        let rest = &text[pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            let ws_len = rest.len() - rest.trim_start().len();
            if let Some(last) = tokens.last_mut() {
                last.trailing_ws.push_str(&rest[..ws_len]);
            }
            pos += ws_len;
            continue;
        }
        let chunk_end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let chunk = &rest[..chunk_end];
        let len = next_token_len(chunk, lex);
        let mut token = Token::new(&chunk[..len], tokens.len(), pos);
        token.trailing_ws = String::new();
        tokens.push(token);
        pos += len;
    }
    tokens
}

fn next_token_len(chunk: &str, lex: &Lexicons) -> usize {
    if let Some(m) = DASH.find(chunk) {
        return m.end();
    }
    if let Some(m) = NUMBER.find(chunk) {
        return m.end();
    }
    // multi-part abbreviations such as "e.g." that the word rule would split
    let abbrev = lex
        .abbreviations
        .iter()
        .filter(|a| {
            chunk.starts_with(a.as_str())
                && !chunk[a.len()..].starts_with(|c: char| c.is_alphanumeric())
        })
        .map(String::len)
        .max();
    if let Some(m) = WORD.find(chunk) {
        let word_end = m.end();
        let mut best = word_end;
        if chunk[word_end..].starts_with('.') && lex.is_abbreviation(&chunk[..word_end + 1]) {
            best = word_end + 1;
        }
        return abbrev.map_or(best, |a| a.max(best));
    }
    if let Some(a) = abbrev {
        return a;
    }
    let first = chunk.chars().next().unwrap();
    if is_terminal(first) {
        return chunk
            .char_indices()
            .find(|&(_, c)| !is_terminal(c))
            .map_or(chunk.len(), |(i, _)| i);
    }
    first.len_utf8()
}

fn is_punct(text: &str) -> bool {
    !text.chars().any(char::is_alphanumeric)
}

fn is_closer(text: &str) -> bool {
    matches!(text, "\"" | "”" | "’" | "'" | ")" | "]" | "»")
}

/// Groups tokens into sentences. A sentence ends at a run of `.`, `!` or `?`
/// (abbreviations are whole tokens and never end one), taking along closing
/// quotes and brackets that directly follow it. No break is made before a word
/// starting in lowercase.
pub fn split_sentences(tokens: Vec<Token>) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut i = 0;
    let n = tokens.len();
    let mut tokens = tokens.into_iter().map(Some).collect::<Vec<_>>();
    while i < n {
        let token = tokens[i].take().unwrap();
        let terminal = token.text.chars().all(is_terminal);
        let mut glued = token.trailing_ws.is_empty();
        current.push(token);
        i += 1;
        if !terminal {
            continue;
        }
        while i < n && glued && is_closer(&tokens[i].as_ref().unwrap().text) {
            let closer = tokens[i].take().unwrap();
            glued = closer.trailing_ws.is_empty();
            current.push(closer);
            i += 1;
        }
        let next_lower = tokens
            .get(i)
            .and_then(|t| t.as_ref())
            .map(|t| t.text.starts_with(|c: char| c.is_lowercase()))
            .unwrap_or(false);
        if !next_lower {
            sentences.push(Sentence {
                tokens: std::mem::take(&mut current),
            });
        }
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    sentences
}

const AUXILIARIES: &[&str] = &[
    "be", "am", "is", "are", "was", "were", "been", "being", "have", "has", "had", "having", "do",
    "does", "did", "will", "would", "shall", "should", "can", "could", "may", "might", "must",
    "'s", "'re", "'ve", "'d", "'ll",
];

fn is_numeral(text: &str) -> bool {
    text.chars().next().is_some_and(|c| c.is_numeric())
        && text.chars().all(|c| c.is_numeric() || c == '.' || c == ',')
}

/// Tags every token of a sentence with one coarse part of speech.
pub fn pos_tag(tokens: &[Token], lex: &Lexicons) -> Vec<Pos> {
    let mut tags: Vec<Pos> = Vec::with_capacity(tokens.len());
    let first_word = tokens.iter().position(|t| !is_punct(&t.text));
    for (i, token) in tokens.iter().enumerate() {
        let text = token.text.as_str();
        let lower = text.to_lowercase();
        let tag = if is_punct(text) {
            Pos::Punct
        } else if is_numeral(text) {
            Pos::Num
        } else if let Some(tag) = lex.pos.get(&lower) {
            *tag
        } else {
            let after_aux = tokens[..i]
                .iter()
                .rev()
                .filter(|t| !is_punct(&t.text))
                .take(2)
                .enumerate()
                .any(|(k, t)| {
                    let l = t.text.to_lowercase();
                    AUXILIARIES.contains(&l.as_str())
                        || (k == 1 && lex.pos.get(&l) == Some(&Pos::Verb))
                });
            let after_det = i > 0 && tags[i - 1] == Pos::Det;
            open_class_tag(text, &lower, Some(i) == first_word, after_aux, after_det, lex)
        };
        tags.push(tag);
    }
    tags
}

fn open_class_tag(
    text: &str,
    lower: &str,
    sentence_initial: bool,
    after_aux: bool,
    after_det: bool,
    lex: &Lexicons,
) -> Pos {
    if let Some((head, tail)) = lower.split_once(['\'', '’']) {
        if tail == "t" && head.ends_with('n') {
            return Pos::Verb;
        }
        if lex.pos.get(head) == Some(&Pos::Pron) {
            return Pos::Pron;
        }
        return Pos::Noun;
    }
    let capitalized = text.starts_with(char::is_uppercase);
    if capitalized && !sentence_initial {
        return Pos::Noun;
    }
    let long = lower.chars().count() > 4;
    if long && lower.ends_with("ly") {
        return Pos::Adv;
    }
    if long
        && ["ous", "ful", "ive", "less", "able", "ible"]
            .iter()
            .any(|s| lower.ends_with(s))
    {
        return Pos::Adj;
    }
    if long && (lower.ends_with("ed") || lower.ends_with("ing")) {
        if after_aux || !after_det {
            return Pos::Verb;
        }
        return if lower.ends_with("ed") { Pos::Adj } else { Pos::Noun };
    }
    Pos::Noun
}

fn is_known(word: &str, lex: &Lexicons) -> bool {
    lex.dale_chall.contains(word)
        || lex.spache.contains(word)
        || lex.pos.contains_key(word)
        || lex.lemma_exceptions.values().any(|l| l == word)
}

fn doubled(stem: &str) -> Option<&str> {
    let b = stem.as_bytes();
    let n = b.len();
    (n >= 3 && b[n - 1] == b[n - 2] && !b"aeiouy".contains(&b[n - 1])).then(|| &stem[..n - 1])
}

fn strip_verb_suffix(word: &str, suffix: &str, lex: &Lexicons) -> Option<String> {
    let stem = word.strip_suffix(suffix)?;
    if stem.chars().count() < 2 || !stem.chars().any(|c| "aeiouy".contains(c)) {
        return None;
    }
    let with_e = format!("{stem}e");
    let undoubled = doubled(stem);
    let candidates: Vec<&str> = undoubled
        .into_iter()
        .chain([stem, with_e.as_str()])
        .collect();
    if let Some(c) = candidates.iter().find(|c| is_known(c, lex)) {
        return Some(c.to_string());
    }
    if let Some(u) = undoubled {
        if !stem.ends_with(['l', 's', 'z', 'f']) {
            return Some(u.to_string());
        }
    }
    Some(stem.to_string())
}

fn strip_plural(word: &str) -> Option<String> {
    if word.chars().count() <= 3 || word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
        return None;
    }
    if let Some(stem) = word.strip_suffix("ies") {
        return Some(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("es") {
        if ["s", "x", "z", "ch", "sh"].iter().any(|s| stem.ends_with(s)) {
            return Some(stem.to_string());
        }
    }
    word.strip_suffix('s').map(str::to_string)
}

/// Dictionary form of a word: exception table first, then suffix stripping
/// for verbs and nouns. Other words are returned lowercased.
pub fn lemmatize(word: &str, pos: Pos, lex: &Lexicons) -> String {
    let lower = word.to_lowercase();
    if matches!(pos, Pos::Punct | Pos::Num) {
        return lower;
    }
    if let Some(lemma) = lex.lemma_exceptions.get(&lower) {
        return lemma.clone();
    }
    if !lower.chars().all(|c| c.is_alphabetic() || c == '-') {
        return lower;
    }
    match pos {
        Pos::Verb => {
            if let Some(stem) = lower.strip_suffix("ied") {
                return format!("{stem}y");
            }
            for suffix in ["ing", "ed"] {
                if let Some(lemma) = strip_verb_suffix(&lower, suffix, lex) {
                    return lemma;
                }
            }
            if lower.ends_with("ies") || lower.ends_with("es") || lower.ends_with('s') {
                return strip_plural(&lower).unwrap_or(lower);
            }
            lower
        }
        Pos::Noun => strip_plural(&lower).unwrap_or(lower),
        _ => lower,
    }
}

/// Vowel groups in the alphabetic core of `word`, less a silent final `e`.
pub fn count_syllables(word: &str) -> usize {
    let core: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if core.is_empty() {
        return 0;
    }
    let vowel = |c: char| "aeiouy".contains(c);
    let mut groups = 0;
    let mut prev = false;
    for &c in &core {
        let v = vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = core.len();
    if n >= 2 && core[n - 1] == 'e' && !vowel(core[n - 2]) {
        let consonant_le = n >= 3 && core[n - 2] == 'l' && !vowel(core[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// A run of tokens inside double quotes, by global token index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuoteSpan {
    pub id: u32,
    /// First and last quoted token (inclusive), excluding the quote marks.
    pub start: usize,
    pub end: usize,
    pub paragraph: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Open,
    Close,
}

fn quote_mark(tokens: &[&Token], i: usize) -> Option<Mark> {
    match tokens[i].text.as_str() {
        "“" => Some(Mark::Open),
        "”" => Some(Mark::Close),
        "\"" => {
            let spaced_before = i == 0 || !tokens[i - 1].trailing_ws.is_empty();
            let spaced_after = !tokens[i].trailing_ws.is_empty() || i + 1 == tokens.len();
            Some(if spaced_before && !spaced_after {
                Mark::Open
            } else if !spaced_before || i + 1 == tokens.len() {
                Mark::Close
            } else {
                Mark::Open
            })
        }
        _ => None,
    }
}

/// Pairs double quotes within each paragraph and sets `quote_id` on the
/// quoted tokens. An opening quote left unclosed runs to the paragraph end; if
/// the next paragraph opens with a quote the same quotation continues there.
pub fn extract_quotes(book: &mut AnnotatedBook) -> (Vec<QuoteSpan>, Vec<String>) {
    let mut spans: Vec<QuoteSpan> = Vec::new();
    let mut warnings = Vec::new();
    let mut assignments: HashMap<usize, u32> = HashMap::new();
    let mut next_id = 0u32;
    // id of a quotation left open at the end of the previous paragraph
    let mut pending: Option<u32> = None;
    let paragraphs: Vec<&Paragraph> = book.body.sections.iter().flat_map(|s| &s.paragraphs).collect();

    for (pi, paragraph) in paragraphs.iter().enumerate() {
        let tokens: Vec<&Token> = paragraph.sentences.iter().flat_map(|s| &s.tokens).collect();
        if tokens.is_empty() {
            continue;
        }
        let continues = pending.take().filter(|_| quote_mark(&tokens, 0) == Some(Mark::Open));
        let mut open: Option<(usize, u32)> = None;
        for i in 0..tokens.len() {
            match quote_mark(&tokens, i) {
                Some(Mark::Open) if open.is_none() => {
                    let id = if i == 0 {
                        continues.unwrap_or_else(|| {
                            next_id += 1;
                            next_id - 1
                        })
                    } else {
                        next_id += 1;
                        next_id - 1
                    };
                    open = Some((i + 1, id));
                }
                Some(Mark::Close) => {
                    if let Some((start, id)) = open.take() {
                        if start < i {
                            spans.push(QuoteSpan {
                                id,
                                start: tokens[start].global_index,
                                end: tokens[i - 1].global_index,
                                paragraph: pi,
                            });
                            for t in &tokens[start..i] {
                                assignments.insert(t.global_index, id);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        if let Some((start, id)) = open {
            if start < tokens.len() {
                spans.push(QuoteSpan {
                    id,
                    start: tokens[start].global_index,
                    end: tokens[tokens.len() - 1].global_index,
                    paragraph: pi,
                });
                for t in &tokens[start..] {
                    assignments.insert(t.global_index, id);
                }
            }
            pending = Some(id);
        }
    }

    // warn for quotations that were left open and not continued
    let mut by_id: HashMap<u32, Vec<&QuoteSpan>> = HashMap::new();
    for s in &spans {
        by_id.entry(s.id).or_default().push(s);
    }
    let mut open_ids: Vec<u32> = Vec::new();
    for (pi, paragraph) in paragraphs.iter().enumerate() {
        let tokens: Vec<&Token> = paragraph.sentences.iter().flat_map(|s| &s.tokens).collect();
        let Some(last) = tokens.last() else { continue };
        if let Some(span) = spans.iter().find(|s| s.paragraph == pi && s.end == last.global_index) {
            let closed = quote_mark(&tokens, tokens.len() - 1) == Some(Mark::Close);
            let continued = by_id[&span.id].iter().any(|s| s.paragraph > pi);
            if !closed && !continued {
                open_ids.push(span.id);
            }
        }
    }
    for id in open_ids {
        let msg = format!("quotation {id} is not closed before the paragraph ends");
        debug!("{msg}");
        warnings.push(msg);
    }

    for token in book.tokens_mut() {
        token.quote_id = assignments.get(&token.global_index).copied();
    }
    (spans, warnings)
}

/// Picks a speaker for every quotation: a character mentioned in the sentence
/// holding the quote or in the narration sentence next to it, preferring the
/// mention closest to a speech verb, otherwise the mention closest to the quote.
pub fn attribute_quotes(
    book: &AnnotatedBook,
    quotes: &[QuoteSpan],
    lex: &Lexicons,
) -> HashMap<u32, Option<u32>> {
    let table = crate::xml::TokenTable::new(book);
    let mut out = HashMap::new();
    for quote in quotes {
        let speaker = (|| {
            let start = table.position_of(quote.start)?;
            let end = table.position_of(quote.end)?;
            let first_sentence = table.tokens[start].sentence;
            let last_sentence = table.tokens[end].sentence;
            let paragraph = table.tokens[start].paragraph;
            let (p_lo, p_hi) = table.paragraphs[paragraph];
            let lo_sentence = first_sentence.saturating_sub(1).max(p_lo);
            let hi_sentence = (last_sentence + 1).min(p_hi.saturating_sub(1));
            let lo = table.sentences[lo_sentence].0;
            let hi = table.sentences[hi_sentence].1;
            let narration = |k: usize| table.tokens[k].token.quote_id.is_none();
            let verbs: Vec<usize> = (lo..hi)
                .filter(|&k| narration(k) && is_speech_verb(table.tokens[k].token, lex))
                .collect();
            let mentions: Vec<(usize, u32)> = (lo..hi)
                .filter(|&k| narration(k))
                .filter_map(|k| table.tokens[k].token.character_id.map(|c| (k, c)))
                .filter(|&(k, c)| k == 0 || table.tokens[k - 1].token.character_id != Some(c))
                .collect();
            if mentions.is_empty() {
                return None;
            }
            let near_verb = mentions
                .iter()
                .filter_map(|&(k, c)| {
                    let d = verbs.iter().map(|&v| v.abs_diff(k)).min()?;
                    (d <= 3).then_some((d, k, c))
                })
                .min();
            if let Some((_, _, c)) = near_verb {
                return Some(c);
            }
            mentions
                .iter()
                .map(|&(k, c)| {
                    let d = if k < start { start - k } else { k.saturating_sub(end) };
                    (d, k, c)
                })
                .min()
                .map(|(_, _, c)| c)
        })();
        out.insert(quote.id, speaker);
    }
    out
}

fn is_speech_verb(token: &Token, lex: &Lexicons) -> bool {
    let lower = token.text.to_lowercase();
    lex.speech_verbs.contains(&lower)
        || token
            .lemma
            .as_ref()
            .is_some_and(|l| lex.speech_verbs.contains(l))
}

/// Tags and lemmatizes every token of the book.
pub fn annotate(book: &mut AnnotatedBook, lex: &Lexicons) {
    for section in &mut book.body.sections {
        for paragraph in &mut section.paragraphs {
            for sentence in &mut paragraph.sentences {
                let tags = pos_tag(&sentence.tokens, lex);
                for (token, tag) in sentence.tokens.iter_mut().zip(tags) {
                    token.lemma = Some(lemmatize(&token.text, tag, lex));
                    token.pos = Some(tag);
                }
            }
        }
    }
}

/// One line of a CoNLL-style annotation file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalToken {
    pub form: String,
    pub lemma: Option<String>,
    pub pos: Option<Pos>,
    pub ner: Option<Ner>,
}

/// Parses tab-separated `FORM LEMMA UPOS NER` lines. Blank lines separate
/// sentences and `#` lines are comments; `_` marks an empty field.
pub fn parse_conll(text: &str) -> Result<Vec<Vec<ExternalToken>>> {
    let mut sentences = vec![Vec::new()];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !sentences.last().unwrap().is_empty() {
                sentences.push(Vec::new());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::ImportFormat {
                line: n + 1,
                message: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        let field = |s: &str| (s != "_" && !s.is_empty()).then(|| s.to_string());
        let pos = field(cols[2])
            .map(|t| {
                t.parse::<Pos>().map_err(|_| Error::ImportFormat {
                    line: n + 1,
                    message: format!("unknown POS tag {t:?}"),
                })
            })
            .transpose()?;
        let ner = match cols[3] {
            "O" | "_" | "" => None,
            t => Some(t.parse::<Ner>().unwrap_or(Ner::Other)),
        };
        sentences.last_mut().unwrap().push(ExternalToken {
            form: cols[0].to_string(),
            lemma: field(cols[1]),
            pos,
            ner,
        });
    }
    if sentences.last().is_some_and(Vec::is_empty) {
        sentences.pop();
    }
    Ok(sentences)
}

/// Replaces tags, lemmas and entity labels with those from an external file
/// whose tokens must match the book's token texts one for one.
pub fn import_external_annotations(book: &mut AnnotatedBook, conll: &Path) -> Result<()> {
    let text = std::fs::read_to_string(conll).map_err(|e| Error::io(conll, e))?;
    let external: Vec<ExternalToken> = parse_conll(&text)?.into_iter().flatten().collect();
    apply_external(book, &external)
}

pub fn apply_external(book: &mut AnnotatedBook, external: &[ExternalToken]) -> Result<()> {
    let count = book.token_count();
    for (index, (token, ext)) in book.tokens().zip(external).enumerate() {
        if token.text != ext.form {
            return Err(Error::Alignment {
                index,
                expected: token.text.clone(),
                found: ext.form.clone(),
            });
        }
    }
    if external.len() != count {
        let index = count.min(external.len());
        return Err(Error::Alignment {
            index,
            expected: book
                .tokens()
                .nth(index)
                .map_or("<end>".to_string(), |t| t.text.clone()),
            found: external
                .get(index)
                .map_or("<end>".to_string(), |t| t.form.clone()),
        });
    }
    for (token, ext) in book.tokens_mut().zip(external) {
        if let Some(pos) = ext.pos {
            token.pos = Some(pos);
        }
        if let Some(lemma) = &ext.lemma {
            token.lemma = Some(lemma.clone());
        }
        token.ner = ext.ner;
    }
    Ok(())
}

/// Words of a sentence that count as words for readability: tokens holding a
/// letter or digit that are not punctuation.
pub fn is_word(token: &Token) -> bool {
    token.pos != Some(Pos::Punct) && token.text.chars().any(char::is_alphanumeric)
}

pub fn distinct_lemmas(book: &AnnotatedBook) -> HashSet<String> {
    book.tokens().filter_map(|t| t.lemma.clone()).collect()
}
