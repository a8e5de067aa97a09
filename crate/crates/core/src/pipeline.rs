//! The per-book phases, each taking the book a step further.

use serde::{Deserialize, Serialize};

use crate::characters::{identify_characters, CharacterConfig};
use crate::error::Result;
use crate::ingest::{
    annotate_front_back_matter, annotate_gutenberg_boilerplate, body_window, MatterConfig,
    RawBook, SourceKind,
};
use crate::lexicon::Lexicons;
use crate::linguistic;
use crate::segmentation::segment_book;
use crate::xml::{AnnotatedBook, MatterBlock, Meta};

/// Settings for the per-book phases.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BookConfig {
    pub matter: MatterConfig,
    pub characters: CharacterConfig,
}

/// Builds the initial annotated book: metadata, boilerplate blocks and the
/// unsegmented body text.
pub fn ingest_book(raw: &RawBook, corpus: &str, cfg: &MatterConfig) -> (AnnotatedBook, Vec<String>) {
    let text = raw.text();
    let mut warnings = raw.warnings.clone();
    let mut spans = Vec::new();
    if raw.source_kind == SourceKind::GutenbergText {
        let scan = annotate_gutenberg_boilerplate(raw);
        warnings.extend(scan.warnings);
        spans.extend(scan.spans);
    }
    spans.extend(annotate_front_back_matter(raw, cfg));
    spans.sort_by_key(|s| s.start_offset);
    let (lo, hi) = body_window(text.len(), &spans);

    let block = |s: &crate::ingest::BoilerplateSpan| MatterBlock {
        kind: s.kind,
        start: s.start_offset,
        end: s.end_offset,
        text: text[s.start_offset..s.end_offset].to_string(),
    };
    let mut book = AnnotatedBook {
        meta: Meta {
            source_id: raw.source_id.clone(),
            corpus: corpus.to_string(),
            title: raw.title().map(str::to_string),
            author: raw.author().map(str::to_string),
            year: raw.year(),
            encoding: Some(raw.encoding.as_str().to_string()),
            subjects: raw.subjects(),
            phases: Vec::new(),
        },
        front: spans.iter().filter(|s| s.kind.is_leading()).map(block).collect(),
        back: spans.iter().filter(|s| !s.kind.is_leading()).map(block).collect(),
        ..AnnotatedBook::default()
    };
    book.body.text = Some(text[lo..hi].to_string());
    (book, warnings)
}

/// Splits the body into sections, paragraphs, sentences and tokens.
pub fn segment(book: &mut AnnotatedBook, lex: &Lexicons) -> Result<Vec<String>> {
    segment_book(book, lex)
}

/// Part-of-speech tags, lemmas and quotation ids.
pub fn annotate_linguistic(book: &mut AnnotatedBook, lex: &Lexicons) -> Vec<String> {
    linguistic::annotate(book, lex);
    linguistic::extract_quotes(book).1
}

pub fn annotate_characters(book: &mut AnnotatedBook, lex: &Lexicons, cfg: &CharacterConfig) {
    identify_characters(book, lex, cfg);
}

/// Runs every per-book phase after ingest.
pub fn process(raw: &RawBook, corpus: &str, lex: &Lexicons, cfg: &BookConfig) -> Result<AnnotatedBook> {
    let (mut book, _) = ingest_book(raw, corpus, &cfg.matter);
    segment(&mut book, lex)?;
    annotate_linguistic(&mut book, lex);
    annotate_characters(&mut book, lex, &cfg.characters);
    Ok(book)
}

/// Annotates a bare body text with no boilerplate, mostly for tests and
/// small experiments.
pub fn annotate_text(source_id: &str, text: &str, lex: &Lexicons, cfg: &CharacterConfig) -> Result<AnnotatedBook> {
    let mut book = AnnotatedBook {
        meta: Meta {
            source_id: source_id.to_string(),
            ..Meta::default()
        },
        ..AnnotatedBook::default()
    };
    book.body.text = Some(text.to_string());
    segment(&mut book, lex)?;
    annotate_linguistic(&mut book, lex);
    annotate_characters(&mut book, lex, cfg);
    Ok(book)
}
