//! Reading raw books and marking the text around the narrative body.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xml::MatterKind;

/// Inserted between consecutive pages when a pagewise book is concatenated.
pub const PAGE_SEPARATOR: &str = "\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    GutenbergText,
    HathiPagewise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    Utf8,
    Latin1,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Utf8 => "utf-8",
            Encoding::Latin1 => "latin-1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBook {
    pub source_id: String,
    pub source_kind: SourceKind,
    pub pages: Vec<String>,
    /// Lowercase keys: `title`, `author`, `year`, `subjects` (`;`-separated), ...
    pub metadata: BTreeMap<String, String>,
    pub encoding: Encoding,
    pub warnings: Vec<String>,
}

impl RawBook {
    pub fn text(&self) -> String {
        self.pages.join(PAGE_SEPARATOR)
    }

    /// Byte offset of every page in [`RawBook::text`].
    pub fn page_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.pages.len());
        let mut offset = 0;
        for page in &self.pages {
            starts.push(offset);
            offset += page.len() + PAGE_SEPARATOR.len();
        }
        starts
    }

    /// Maps an offset in the concatenated text to `(page, offset in page)`.
    /// Offsets inside a separator map to the end of the preceding page.
    pub fn locate(&self, offset: usize) -> Option<(usize, usize)> {
        let starts = self.page_starts();
        let page = match starts.binary_search(&offset) {
            Ok(i) => i,
            Err(0) => return None,
            Err(i) => i - 1,
        };
        let within = offset - starts[page];
        (within <= self.pages[page].len()).then_some((page, within)).or_else(|| {
            (offset < self.text_len()).then(|| (page, self.pages[page].len()))
        })
    }

    pub fn text_len(&self) -> usize {
        self.pages.iter().map(String::len).sum::<usize>()
            + PAGE_SEPARATOR.len() * self.pages.len().saturating_sub(1)
    }

    pub fn title(&self) -> Option<&str> {
        self.metadata.get("title").map(String::as_str)
    }

    pub fn author(&self) -> Option<&str> {
        self.metadata.get("author").map(String::as_str)
    }

    pub fn year(&self) -> Option<i32> {
        self.metadata.get("year").and_then(|y| y.trim().parse().ok())
    }

    pub fn subjects(&self) -> Vec<String> {
        self.metadata
            .get("subjects")
            .map(|s| {
                s.split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoilerplateSpan {
    pub kind: MatterKind,
    pub start_offset: usize,
    pub end_offset: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoilerplateScan {
    pub spans: Vec<BoilerplateSpan>,
    pub warnings: Vec<String>,
}

/// Decodes bytes as UTF-8, falling back to Latin-1, then normalizes line
/// endings to `\n` and drops a byte-order mark and NUL characters.
pub fn decode(bytes: &[u8]) -> (String, Encoding) {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let (text, encoding) = match std::str::from_utf8(bytes) {
        Ok(s) => (s.to_string(), Encoding::Utf8),
        Err(_) => (bytes.iter().map(|&b| b as char).collect(), Encoding::Latin1),
    };
    let mut text = text.replace("\r\n", "\n").replace('\r', "\n").replace('\0', "");
    // DOS end-of-file marker
    if text.ends_with('\u{1a}') {
        text.pop();
    }
    (text, encoding)
}

fn read_file(path: &Path) -> Result<(String, Encoding)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes))
}

static METADATA_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(title|author|release date|posting date|language|character set encoding|produced by|translator|illustrator|editor|subject|most recently updated|original publication|credits)\s*:\s*(.*?)\s*$").unwrap()
});

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(1[0-9]{3}|20[0-9]{2})\b").unwrap());

/// Reads a Project Gutenberg plain-text file.
pub fn read_gutenberg(path: &Path) -> Result<RawBook> {
    let (text, encoding) = read_file(path)?;
    if text.trim().is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let source_id = if !stem.is_empty() && stem.bytes().all(|b| b.is_ascii_digit()) {
        format!("pg{stem}")
    } else {
        stem
    };
    let mut book = RawBook {
        source_id,
        source_kind: SourceKind::GutenbergText,
        metadata: BTreeMap::new(),
        encoding,
        warnings: Vec::new(),
        pages: vec![text],
    };
    book.metadata = header_metadata(&book.pages[0]);
    Ok(book)
}

fn header_metadata(text: &str) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    let header_end = START_MARKERS
        .iter()
        .filter_map(|re| re.find(text))
        .map(|m| m.start())
        .min()
        .unwrap_or_else(|| text.lines().take(120).map(|l| l.len() + 1).sum());
    let mut subjects = Vec::new();
    for line in text[..header_end.min(text.len())].lines() {
        let Some(caps) = METADATA_LINE.captures(line) else {
            continue;
        };
        let key = caps[1].to_lowercase();
        let value = caps[2].to_string();
        if value.is_empty() {
            continue;
        }
        match key.as_str() {
            "title" | "author" | "language" => {
                meta.entry(key).or_insert(value);
            }
            "subject" => subjects.push(value),
            "original publication" | "release date" => {
                if let Some(y) = YEAR.find(&value) {
                    // the original publication year wins over the e-text release
                    if key == "original publication" || !meta.contains_key("year") {
                        meta.insert("year".to_string(), y.as_str().to_string());
                    }
                }
            }
            _ => {}
        }
    }
    if !subjects.is_empty() {
        meta.insert("subjects".to_string(), subjects.join("; "));
    }
    meta
}

/// Reads `key: value` lines.
pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let (text, _) = read_file(path)?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_string()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .collect())
}

/// Reads a directory of page files named by zero-padded page number.
///
/// Metadata comes from `<dir>.manifest` next to the directory, or from a file
/// named `manifest` inside it.
pub fn read_hathi_pagewise(dir: &Path) -> Result<RawBook> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut numbered: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let number = stem
            .parse::<u64>()
            .ok()
            .filter(|_| stem.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| Error::NonNumericPage(path.display().to_string()))?;
        numbered.push((number, path));
    }
    if numbered.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{}: no page files",
            dir.display()
        )));
    }
    numbered.sort();

    let mut warnings = Vec::new();
    let mut expected = 1;
    for (n, _) in &numbered {
        if *n != expected {
            let msg = format!("page gap: expected page {expected}, found page {n}");
            warnings.push(msg);
        }
        expected = n + 1;
    }

    let mut pages = Vec::with_capacity(numbered.len());
    let mut encoding = Encoding::Utf8;
    for (_, path) in &numbered {
        let (text, enc) = read_file(path)?;
        if enc == Encoding::Latin1 {
            encoding = Encoding::Latin1;
        }
        pages.push(text);
    }
    if pages.iter().all(|p| p.trim().is_empty()) {
        return Err(Error::EmptyInput(format!(
            "{}: all pages are blank",
            dir.display()
        )));
    }

    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let sibling = dir.with_file_name(format!("{name}.manifest"));
    let inside = dir.join("manifest");
    let metadata = if sibling.is_file() {
        read_manifest(&sibling)?
    } else if inside.is_file() {
        read_manifest(&inside)?
    } else {
        BTreeMap::new()
    };

    Ok(RawBook {
        source_id: name,
        source_kind: SourceKind::HathiPagewise,
        pages,
        metadata,
        encoding,
        warnings,
    })
}

static START_MARKERS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"(?im)^[ \t]*\*{3}[ \t]*START OF (THE|THIS) PROJECT GUTENBERG E-?BOOK\b.*$",
        r"(?im)^[ \t]*\*{3}[ \t]*START OF THE PROJECT GUTENBERG\b.*$",
        r"(?im)^[ \t]*\*END\*[ \t]*THE SMALL PRINT!.*$",
        r"(?im)^[ \t]*\*{3}START\*\*THE SMALL PRINT!.*$",
        r"(?im)^[ \t]*\*\*\*[ \t]*START OF THE PROJECT GUTENBERG.*$",
    ]
    .iter()
    .map(|p| Regex::new(p).unwrap())
    .collect()
});

static END_MARKERS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"(?im)^[ \t]*\*{3}[ \t]*END OF (THE|THIS) PROJECT GUTENBERG E-?BOOK\b.*$",
        r"(?im)^[ \t]*\*{3}[ \t]*END OF THE PROJECT GUTENBERG\b.*$",
        r"(?im)^[ \t]*END OF (THE |THIS )?PROJECT GUTENBERG('?S)?\b.*$",
        r"(?im)^[ \t]*END OF THE PROJECT GUTENBERG E-?(BOOK|TEXT)\b.*$",
        r"(?im)^[ \t]*\*{3}[ \t]*END OF THIS PROJECT GUTENBERG\b.*$",
    ]
    .iter()
    .map(|p| Regex::new(p).unwrap())
    .collect()
});

fn line_end_after(text: &str, offset: usize) -> usize {
    match text[offset..].find('\n') {
        Some(i) => offset + i + 1,
        None => text.len(),
    }
}

/// Marks the Project Gutenberg license header and footer.
///
/// The header runs through the START marker line and the footer begins at the
/// earliest END marker after it. Without a START marker, the header is taken to
/// end at the first blank-line-delimited block after the last metadata line.
pub fn annotate_gutenberg_boilerplate(book: &RawBook) -> BoilerplateScan {
    let text = book.text();
    annotate_gutenberg_text(&text)
}

pub fn annotate_gutenberg_text(text: &str) -> BoilerplateScan {
    let mut scan = BoilerplateScan::default();

    let start = START_MARKERS
        .iter()
        .filter_map(|re| re.find(text))
        .min_by_key(|m| m.start());
    let header_end = match start {
        Some(m) => Some(line_end_after(text, m.end())),
        None => heuristic_header_end(text),
    };
    if let Some(end) = header_end {
        scan.spans.push(BoilerplateSpan {
            kind: MatterKind::GutenbergHeader,
            start_offset: 0,
            end_offset: end,
        });
    }

    let search_from = header_end.unwrap_or(0);
    let footer_start = END_MARKERS
        .iter()
        .filter_map(|re| re.find_at(text, search_from))
        .map(|m| m.start())
        .min();
    if let Some(begin) = footer_start {
        if begin < text.len() {
            scan.spans.push(BoilerplateSpan {
                kind: MatterKind::GutenbergFooter,
                start_offset: begin,
                end_offset: text.len(),
            });
        }
    }

    if start.is_none() && header_end.is_none() && footer_start.is_none() {
        scan.warnings
            .push("no Project Gutenberg markers or metadata lines found".to_string());
    } else if start.is_none() && header_end.is_some() {
        scan.warnings
            .push("no START marker; header end inferred from metadata lines".to_string());
    }
    scan
}

/// End of the first blank-line-delimited block after the last metadata line in
/// the opening part of the text.
fn heuristic_header_end(text: &str) -> Option<usize> {
    let window_end = text
        .char_indices()
        .nth(20_000)
        .map_or(text.len(), |(i, _)| i);
    let mut offset = 0;
    let mut last_meta_end = None;
    for line in text[..window_end].split_inclusive('\n') {
        if METADATA_LINE.is_match(line.trim_end_matches('\n')) {
            last_meta_end = Some(offset + line.len());
        }
        offset += line.len();
    }
    let mut pos = last_meta_end?;
    // skip blank lines, then the block, and stop after the blank line ending it
    let mut in_block = false;
    for line in text[pos..].split_inclusive('\n') {
        let blank = line.trim().is_empty();
        if in_block && blank {
            return Some(pos + line.len());
        }
        if !blank {
            in_block = true;
        }
        pos += line.len();
    }
    Some(text.len())
}

/// Thresholds for the front/back matter heuristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatterConfig {
    /// Front matter must start within this leading fraction of the text.
    pub front_fraction: f64,
    /// Back matter must start within this trailing fraction of the text.
    pub back_fraction: f64,
    /// A unit is list-like when more than this share of its lines are short.
    pub short_line_ratio: f64,
    pub short_line_chars: usize,
}

impl Default for MatterConfig {
    fn default() -> Self {
        MatterConfig {
            front_fraction: 0.05,
            back_fraction: 0.05,
            short_line_ratio: 0.30,
            short_line_chars: 25,
        }
    }
}

static TOC_KEYWORD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(table\s+of\s+)?(contents|illustrations|list\s+of\s+illustrations)\.?\s*$")
        .unwrap()
});

static PUBLISHER_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(copyright|©|all rights reserved|published by|printed by|publishers?\b|printed in|first (published|edition)|entered according to act of congress|library of congress|\bisbn\b)").unwrap()
});

static HEADER_LIKE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(chapter|book|part|volume|section)\s+([0-9]+|[ivxlcdm]+|the\s+\w+|[a-z]+(-[a-z]+)?)\b").unwrap()
});

static THE_END: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*[\[(]?\s*(the\s+end|finis)\s*[.!]?\s*[\])]?\s*$").unwrap());

static ADVERTISEMENT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(advertisement|by the same author|now ready|new books|catalogue|price\s|cloth\b|\d+s\.\s*\d*d\.|publishers?\b|uniform with this volume|press notices|recently published|in preparation)").unwrap()
});

/// A page (pagewise books) or blank-line-delimited block (single-page books).
#[derive(Debug, Clone, Copy)]
struct Unit {
    start: usize,
    end: usize,
}

fn units(book: &RawBook, text: &str, lo: usize, hi: usize) -> Vec<Unit> {
    let mut out = Vec::new();
    if book.pages.len() > 1 {
        for (i, start) in book.page_starts().into_iter().enumerate() {
            let end = start + book.pages[i].len();
            let (s, e) = (start.max(lo), end.min(hi));
            if s < e && !text[s..e].trim().is_empty() {
                out.push(Unit { start: s, end: e });
            }
        }
        return out;
    }
    let mut offset = lo;
    let mut block_start: Option<usize> = None;
    for line in text[lo..hi].split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(s) = block_start.take() {
                out.push(Unit { start: s, end: offset });
            }
        } else if block_start.is_none() {
            block_start = Some(offset);
        }
        offset += line.len();
    }
    if let Some(s) = block_start {
        out.push(Unit { start: s, end: hi });
    }
    out
}

fn non_empty_lines(s: &str) -> impl Iterator<Item = &str> {
    s.lines().map(str::trim).filter(|l| !l.is_empty())
}

fn short_share(s: &str, cfg: &MatterConfig) -> f64 {
    let (mut short, mut all) = (0usize, 0usize);
    for line in non_empty_lines(s) {
        all += 1;
        if line.chars().count() < cfg.short_line_chars {
            short += 1;
        }
    }
    if all == 0 {
        0.0
    } else {
        short as f64 / all as f64
    }
}

fn normalize_heading(line: &str) -> String {
    line.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .take(2)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Marks leading front matter and trailing back matter.
///
/// Leading units are front matter while they look like a title page, contents
/// list or publisher page; trailing text after a closing "THE END" line, and
/// trailing advertisement units, are back matter.
pub fn annotate_front_back_matter(book: &RawBook, cfg: &MatterConfig) -> Vec<BoilerplateSpan> {
    let text = book.text();
    let (lo, hi) = if book.source_kind == SourceKind::GutenbergText {
        body_window(text.len(), &annotate_gutenberg_text(&text).spans)
    } else {
        (0, text.len())
    };
    if lo >= hi {
        return Vec::new();
    }
    let span_len = (hi - lo) as f64;
    let units = units(book, &text, lo, hi);
    let mut spans = Vec::new();

    // front
    let front_limit = lo + (span_len * cfg.front_fraction).ceil() as usize;
    let mut front_end = None;
    let mut in_toc = false;
    let mut toc_entries: Vec<String> = Vec::new();
    for unit in &units {
        if unit.start > front_limit {
            break;
        }
        let chunk = &text[unit.start..unit.end];
        let first = non_empty_lines(chunk).next().unwrap_or("");
        let headings: Vec<&str> = non_empty_lines(chunk).filter(|l| HEADER_LIKE.is_match(l)).collect();
        if TOC_KEYWORD.is_match(first) {
            in_toc = true;
            toc_entries.extend(headings.iter().map(|l| normalize_heading(l)));
            front_end = Some(unit.end);
            continue;
        }
        if !headings.is_empty() {
            let key = normalize_heading(headings[0]);
            let repeated = toc_entries.contains(&key);
            if in_toc && !repeated && headings.len() * 2 >= non_empty_lines(chunk).count() {
                toc_entries.extend(headings.iter().map(|l| normalize_heading(l)));
                front_end = Some(unit.end);
                continue;
            }
            break;
        }
        let listy = short_share(chunk, cfg) > cfg.short_line_ratio;
        let publisher = non_empty_lines(chunk).any(|l| PUBLISHER_LINE.is_match(l));
        if listy || publisher {
            front_end = Some(unit.end);
            continue;
        }
        break;
    }
    if let Some(end) = front_end {
        spans.push(BoilerplateSpan {
            kind: MatterKind::FrontMatter,
            start_offset: lo,
            end_offset: end,
        });
    }
    let body_floor = front_end.unwrap_or(lo);

    // back
    let back_limit = hi.saturating_sub((span_len * cfg.back_fraction).ceil() as usize);
    let mut back_start = None;
    let mut offset = body_floor;
    for line in text[body_floor..hi].split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        if line_start >= back_limit
            && THE_END.is_match(line.trim_end_matches('\n'))
            && !text[offset.min(hi)..hi].trim().is_empty()
        {
            back_start = Some(offset.min(hi));
        }
    }
    for unit in units.iter().rev() {
        if unit.start < back_limit || unit.start < body_floor {
            break;
        }
        let chunk = &text[unit.start..unit.end];
        if non_empty_lines(chunk).any(|l| ADVERTISEMENT.is_match(l)) {
            back_start = Some(back_start.map_or(unit.start, |b: usize| b.min(unit.start)));
        } else {
            break;
        }
    }
    if let Some(start) = back_start {
        // skip leading whitespace so the span starts on text
        let skip = text[start..hi].len() - text[start..hi].trim_start().len();
        let start = start + skip;
        if start < hi {
            spans.push(BoilerplateSpan {
                kind: MatterKind::BackMatter,
                start_offset: start,
                end_offset: hi,
            });
        }
    }
    spans
}

/// The `[start, end)` range of text not covered by leading or trailing spans.
pub fn body_window(text_len: usize, spans: &[BoilerplateSpan]) -> (usize, usize) {
    let start = spans
        .iter()
        .filter(|s| s.kind.is_leading())
        .map(|s| s.end_offset)
        .max()
        .unwrap_or(0);
    let end = spans
        .iter()
        .filter(|s| !s.kind.is_leading())
        .map(|s| s.start_offset)
        .min()
        .unwrap_or(text_len)
        .max(start);
    (start, end)
}

/// Downloads the plain-text file of Gutenberg book `id` into `dest`.
///
/// Files already on disk are not fetched again. Downloads go to a temporary
/// file first, so a present file is always complete.
pub fn fetch_gutenberg(id: u64, mirror_base: &str, dest: &Path) -> Result<PathBuf> {
    let target = dest.join(format!("pg{id}.txt"));
    if target.metadata().map(|m| m.len() > 0).unwrap_or(false) {
        return Ok(target);
    }
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let url = format!(
        "{}/cache/epub/{id}/pg{id}.txt",
        mirror_base.trim_end_matches('/')
    );
    let bytes = match ureq::get(&url).call() {
        Ok(mut resp) => resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| Error::Http {
                url: url.clone(),
                message: e.to_string(),
            })?,
        Err(ureq::Error::StatusCode(404)) => return Err(Error::NotFound(url)),
        Err(e) => {
            return Err(Error::Http {
                url,
                message: e.to_string(),
            })
        }
    };
    if bytes.is_empty() {
        return Err(Error::EmptyInput(url));
    }
    let partial = dest.join(format!(".pg{id}.txt.part"));
    fs::write(&partial, &bytes).map_err(|e| Error::io(&partial, e))?;
    fs::rename(&partial, &target).map_err(|e| Error::io(&target, e))?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gutenberg(text: &str) -> RawBook {
        RawBook {
            source_id: "t".into(),
            source_kind: SourceKind::GutenbergText,
            pages: vec![text.to_string()],
            metadata: BTreeMap::new(),
            encoding: Encoding::Utf8,
            warnings: Vec::new(),
        }
    }

    fn pagewise(pages: &[&str]) -> RawBook {
        RawBook {
            source_id: "h".into(),
            source_kind: SourceKind::HathiPagewise,
            pages: pages.iter().map(|p| p.to_string()).collect(),
            metadata: BTreeMap::new(),
            encoding: Encoding::Utf8,
            warnings: Vec::new(),
        }
    }

    const PROSE: &str = "It was a bright cold day in April, and the clocks were striking thirteen. \
        Winston Smith, his chin nuzzled into his breast in an effort to escape the vile wind, \
        slipped quickly through the glass doors of Victory Mansions.";

    #[test]
    fn decode_falls_back_to_latin1() {
        let (text, enc) = decode(b"caf\xe9\r\nend\x1a");
        assert_eq!(enc, Encoding::Latin1);
        assert_eq!(text, "café\nend");
        let (text, enc) = decode("café".as_bytes());
        assert_eq!(enc, Encoding::Utf8);
        assert_eq!(text, "café");
    }

    #[test]
    fn reads_title_and_author_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("730.txt");
        fs::write(
            &path,
            "The Project Gutenberg EBook of Oliver Twist\n\nTitle: Oliver Twist\nAuthor: Charles Dickens\n\n*** START OF THIS PROJECT GUTENBERG EBOOK OLIVER TWIST ***\nbody\n",
        )
        .unwrap();
        let book = read_gutenberg(&path).unwrap();
        assert_eq!(book.source_id, "pg730");
        assert_eq!(book.title(), Some("Oliver Twist"));
        assert_eq!(book.author(), Some("Charles Dickens"));
        assert_eq!(book.pages.len(), 1);
    }

    #[test]
    fn empty_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        fs::write(&path, "  \n").unwrap();
        assert!(matches!(read_gutenberg(&path), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn file_without_metadata_is_passed_through() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plain.txt");
        fs::write(&path, "Just a story.\n").unwrap();
        let book = read_gutenberg(&path).unwrap();
        assert!(book.metadata.is_empty());
        assert_eq!(book.pages, vec!["Just a story.\n".to_string()]);
    }

    #[test]
    fn pages_sorted_numerically() {
        let dir = tempfile::tempdir().unwrap();
        let book_dir = dir.path().join("vol");
        fs::create_dir(&book_dir).unwrap();
        fs::write(book_dir.join("00000010.txt"), "ten").unwrap();
        fs::write(book_dir.join("00000002.txt"), "two").unwrap();
        fs::write(book_dir.join("00000001.txt"), "one").unwrap();
        let book = read_hathi_pagewise(&book_dir).unwrap();
        assert_eq!(book.pages, vec!["one", "two", "ten"]);
        assert_eq!(book.warnings.len(), 1, "{:?}", book.warnings);
    }

    #[test]
    fn two_pages_in_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("00000001.txt"), "a").unwrap();
        fs::write(dir.path().join("00000002.txt"), "b").unwrap();
        let book = read_hathi_pagewise(dir.path()).unwrap();
        assert_eq!(book.pages, vec!["a", "b"]);
        assert!(book.warnings.is_empty());
        assert_eq!(book.text_len(), 3);
        assert_eq!(book.text(), "a\nb");
    }

    #[test]
    fn single_late_page_warns_about_gap() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("00000002.txt"), "b").unwrap();
        let book = read_hathi_pagewise(dir.path()).unwrap();
        assert_eq!(book.pages, vec!["b"]);
        assert_eq!(book.warnings.len(), 1);
    }

    #[test]
    fn pagewise_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_hathi_pagewise(dir.path()),
            Err(Error::EmptyInput(_))
        ));
        fs::write(dir.path().join("cover.txt"), "x").unwrap();
        assert!(matches!(
            read_hathi_pagewise(dir.path()),
            Err(Error::NonNumericPage(_))
        ));
    }

    #[test]
    fn sibling_manifest_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let book_dir = dir.path().join("mdp.123");
        fs::create_dir(&book_dir).unwrap();
        fs::write(book_dir.join("00000001.txt"), "text").unwrap();
        fs::write(
            dir.path().join("mdp.123.manifest"),
            "title: A Tale\nauthor: Someone\nyear: 1851\n",
        )
        .unwrap();
        let book = read_hathi_pagewise(&book_dir).unwrap();
        assert_eq!(book.title(), Some("A Tale"));
        assert_eq!(book.year(), Some(1851));
    }

    #[test]
    fn locate_maps_offsets_to_pages() {
        let book = pagewise(&["abc", "de", "f"]);
        assert_eq!(book.locate(0), Some((0, 0)));
        assert_eq!(book.locate(2), Some((0, 2)));
        assert_eq!(book.locate(4), Some((1, 0)));
        assert_eq!(book.locate(7), Some((2, 0)));
        let text = book.text();
        for (offset, c) in text.char_indices() {
            let (p, o) = book.locate(offset).unwrap();
            if c != '\n' {
                assert_eq!(book.pages[p].as_bytes()[o] as char, c);
            }
        }
    }

    #[test]
    fn markers_bracket_the_body() {
        let text = "The Project Gutenberg eBook of X\n\nTitle: X\n\n*** START OF THE PROJECT GUTENBERG EBOOK X ***\n\nBody text here.\n\n*** END OF THE PROJECT GUTENBERG EBOOK X ***\nLicense.\n";
        let scan = annotate_gutenberg_text(text);
        assert_eq!(scan.spans.len(), 2);
        let header = scan.spans[0];
        let footer = scan.spans[1];
        assert_eq!(header.kind, MatterKind::GutenbergHeader);
        assert_eq!(footer.kind, MatterKind::GutenbergFooter);
        assert_eq!(&text[header.end_offset..footer.start_offset], "\nBody text here.\n\n");
        assert_eq!(footer.end_offset, text.len());
        assert!(scan.warnings.is_empty());
    }

    #[test]
    fn no_markers_no_spans() {
        let scan = annotate_gutenberg_text("Once upon a time.\n\nThe end of a story.\n");
        assert!(scan.spans.is_empty());
        assert_eq!(scan.warnings.len(), 1);
    }

    #[test]
    fn start_marker_only() {
        let scan = annotate_gutenberg_text(
            "header\n***START OF THE PROJECT GUTENBERG EBOOK Y***\nstory\n",
        );
        assert_eq!(scan.spans.len(), 1);
        assert_eq!(scan.spans[0].kind, MatterKind::GutenbergHeader);
    }

    #[test]
    fn legacy_footer_line() {
        let text = "*** START OF THIS PROJECT GUTENBERG EBOOK Z ***\nstory\nEnd of Project Gutenberg's Oliver Twist, by Charles Dickens\n\n*** END OF THIS PROJECT GUTENBERG EBOOK OLIVER TWIST ***\n";
        let scan = annotate_gutenberg_text(text);
        let footer = scan.spans[1];
        assert!(text[footer.start_offset..].starts_with("End of Project Gutenberg's"));
    }

    #[test]
    fn heuristic_header_from_metadata_lines() {
        let text = "Title: Y\nAuthor: Z\n\nProduced by someone kind\nand friends\n\nCHAPTER I\n\nStory.\n";
        let scan = annotate_gutenberg_text(text);
        assert_eq!(scan.spans.len(), 1);
        assert!(text[scan.spans[0].end_offset..].starts_with("CHAPTER I"));
    }

    #[test]
    fn rescanning_the_body_finds_nothing() {
        let text = "*** START OF THE PROJECT GUTENBERG EBOOK X ***\n\nBody text here.\n\n*** END OF THE PROJECT GUTENBERG EBOOK X ***\n";
        let scan = annotate_gutenberg_text(text);
        let (s, e) = body_window(text.len(), &scan.spans);
        let again = annotate_gutenberg_text(&text[s..e]);
        assert!(again.spans.is_empty());
    }

    #[test]
    fn contents_page_is_front_matter() {
        let prose_pages: Vec<String> = (0..40).map(|_| PROSE.to_string()).collect();
        let mut pages = vec!["CONTENTS\nI. The Start\nII. The Middle\nIII. The End".to_string()];
        pages.extend(prose_pages);
        let refs: Vec<&str> = pages.iter().map(String::as_str).collect();
        let book = pagewise(&refs);
        let spans = annotate_front_back_matter(&book, &MatterConfig::default());
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].kind, MatterKind::FrontMatter);
        assert_eq!(spans[0].start_offset, 0);
        assert_eq!(spans[0].end_offset, pages[0].len());
    }

    #[test]
    fn body_only_book_has_no_matter() {
        let pages: Vec<&str> = (0..10).map(|_| PROSE).collect();
        let book = pagewise(&pages);
        assert!(annotate_front_back_matter(&book, &MatterConfig::default()).is_empty());
    }

    #[test]
    fn advertisements_after_the_end_are_back_matter() {
        let mut pages: Vec<String> = (0..40).map(|_| PROSE.to_string()).collect();
        pages.push(format!("{PROSE}\n\nTHE END"));
        pages.push("NEW BOOKS BY THE SAME AUTHOR\nA Novel. Cloth, 3s. 6d.\nNow ready.".to_string());
        let refs: Vec<&str> = pages.iter().map(String::as_str).collect();
        let book = pagewise(&refs);
        let spans = annotate_front_back_matter(&book, &MatterConfig::default());
        assert_eq!(spans.len(), 1, "{spans:?}");
        let back = spans[0];
        assert_eq!(back.kind, MatterKind::BackMatter);
        let text = book.text();
        assert!(text[back.start_offset..].starts_with("NEW BOOKS"));
        assert_eq!(back.end_offset, text.len());
    }

    #[test]
    fn spans_and_body_reconstruct_the_text() {
        let text = "Title: X\n\n*** START OF THE PROJECT GUTENBERG EBOOK X ***\nCONTENTS\n\nCHAPTER I\n\nbody\n*** END OF THE PROJECT GUTENBERG EBOOK X ***\nfooter\n";
        let book = gutenberg(text);
        let mut spans = annotate_gutenberg_boilerplate(&book).spans;
        spans.extend(annotate_front_back_matter(&book, &MatterConfig::default()));
        spans.sort_by_key(|s| s.start_offset);
        let mut rebuilt = String::new();
        let mut cursor = 0;
        for s in &spans {
            assert!(s.start_offset < s.end_offset);
            assert!(s.start_offset >= cursor, "overlap: {spans:?}");
            rebuilt.push_str(&text[cursor..s.start_offset]);
            rebuilt.push_str(&text[s.start_offset..s.end_offset]);
            cursor = s.end_offset;
        }
        rebuilt.push_str(&text[cursor..]);
        assert_eq!(rebuilt, text);
    }

    fn serve(body: &'static [u8], status: &'static str) -> (String, std::sync::Arc<std::sync::atomic::AtomicUsize>) {
        use std::io::{Read, Write};
        use std::sync::atomic::{AtomicUsize, Ordering};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = std::sync::Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let mut stream = stream.unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let head = format!(
                    "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    body.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(body);
            }
        });
        (format!("http://{addr}"), hits)
    }

    #[test]
    fn fetch_downloads_once() {
        use std::sync::atomic::Ordering;
        let (base, hits) = serve(b"*** START OF THE PROJECT GUTENBERG EBOOK X ***\nbody\n", "200 OK");
        let dir = tempfile::tempdir().unwrap();
        let path = fetch_gutenberg(730, &base, dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap(), "pg730.txt");
        assert!(fs::read_to_string(&path).unwrap().contains("body"));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
        fetch_gutenberg(730, &base, dir.path()).unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn fetch_missing_book() {
        let (base, _) = serve(b"", "404 Not Found");
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            fetch_gutenberg(1, &base, dir.path()),
            Err(Error::NotFound(_))
        ));
        assert!(!dir.path().join("pg1.txt").exists());
    }
}
