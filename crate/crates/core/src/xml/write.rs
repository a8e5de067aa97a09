use std::fmt::Write as _;

use super::{AnnotatedBook, CharacterRecord, Header, MatterBlock, Meta, Section, Token};
use crate::error::{Error, Result};

const INDENT: &str = "  ";

/// Writes the canonical XML form of `book`.
///
/// Output is deterministic: attributes appear in a fixed order, optional
/// attributes are omitted when absent, and nesting is indented by two spaces.
/// A token's `ws` attribute is omitted when its trailing whitespace is a single
/// space.
pub fn serialize(book: &AnnotatedBook) -> Result<String> {
    book.validate()?;
    let mut w = Writer::default();
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    w.open("book", &[], 0);
    write_meta(&mut w, &book.meta);
    for block in &book.front {
        write_matter(&mut w, "front", block);
    }
    write_characters(&mut w, &book.characters);
    write_body(&mut w, book);
    for block in &book.back {
        write_matter(&mut w, "back", block);
    }
    w.close("book", 0);
    // escaped text cannot produce this sequence, only an escaped NUL can
    if w.out.contains("&#0;") {
        return Err(Error::Invariant("text contains a NUL character, which XML cannot hold".into()));
    }
    Ok(w.out)
}

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
    }

    fn start_tag(&mut self, name: &str, attrs: &[(&str, String)]) {
        self.out.push('<');
        self.out.push_str(name);
        for (key, value) in attrs {
            let _ = write!(self.out, " {}=\"{}\"", key, escape_attr(value));
        }
    }

    fn open(&mut self, name: &str, attrs: &[(&str, String)], depth: usize) {
        self.indent(depth);
        self.start_tag(name, attrs);
        self.out.push_str(">\n");
    }

    fn empty(&mut self, name: &str, attrs: &[(&str, String)], depth: usize) {
        self.indent(depth);
        self.start_tag(name, attrs);
        self.out.push_str("/>\n");
    }

    fn close(&mut self, name: &str, depth: usize) {
        self.indent(depth);
        let _ = writeln!(self.out, "</{name}>");
    }

    fn text_element(&mut self, name: &str, attrs: &[(&str, String)], text: &str, depth: usize) {
        self.indent(depth);
        self.start_tag(name, attrs);
        self.out.push('>');
        self.out.push_str(&escape_text(text));
        let _ = writeln!(self.out, "</{name}>");
    }
}

fn write_meta(w: &mut Writer, meta: &Meta) {
    let mut attrs = vec![
        ("source", meta.source_id.clone()),
        ("corpus", meta.corpus.clone()),
    ];
    if let Some(t) = &meta.title {
        attrs.push(("title", t.clone()));
    }
    if let Some(a) = &meta.author {
        attrs.push(("author", a.clone()));
    }
    if let Some(y) = meta.year {
        attrs.push(("year", y.to_string()));
    }
    if let Some(e) = &meta.encoding {
        attrs.push(("encoding", e.clone()));
    }
    if meta.subjects.is_empty() && meta.phases.is_empty() {
        w.empty("meta", &attrs, 1);
        return;
    }
    w.open("meta", &attrs, 1);
    for subject in &meta.subjects {
        w.text_element("subject", &[], subject, 2);
    }
    for stamp in &meta.phases {
        w.empty(
            "phase",
            &[
                ("name", stamp.phase.as_str().to_string()),
                ("digest", stamp.digest.clone()),
            ],
            2,
        );
    }
    w.close("meta", 1);
}

fn write_matter(w: &mut Writer, element: &str, block: &MatterBlock) {
    w.text_element(
        element,
        &[
            ("kind", block.kind.as_str().to_string()),
            ("start", block.start.to_string()),
            ("end", block.end.to_string()),
        ],
        &block.text,
        1,
    );
}

fn write_characters(w: &mut Writer, characters: &[CharacterRecord]) {
    if characters.is_empty() {
        w.empty("characters", &[], 1);
        return;
    }
    w.open("characters", &[], 1);
    for c in characters {
        w.open(
            "character",
            &[
                ("id", c.id.to_string()),
                ("name", c.canonical_name.clone()),
                ("gender", c.gender.as_str().to_string()),
                ("count", c.mention_count().to_string()),
                ("gcc", c.gcc.to_string()),
                ("fpcc", c.fpcc.to_string()),
                ("spcc", c.spcc.to_string()),
            ],
            2,
        );
        for (alias, count) in &c.aliases {
            w.text_element("name", &[("count", count.to_string())], alias, 3);
        }
        let mentions = c
            .mention_token_indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        w.text_element("mentions", &[], &mentions, 3);
        w.close("character", 2);
    }
    w.close("characters", 1);
}

fn write_body(w: &mut Writer, book: &AnnotatedBook) {
    let body = &book.body;
    let mut attrs = Vec::new();
    if !body.lead.is_empty() {
        attrs.push(("lead", body.lead.clone()));
    }
    if body.text.is_none() && body.sections.is_empty() {
        w.empty("body", &attrs, 1);
        return;
    }
    w.open("body", &attrs, 1);
    if let Some(text) = &body.text {
        w.text_element("text", &[], text, 2);
    }
    for section in &body.sections {
        write_section(w, section);
    }
    w.close("body", 1);
}

fn write_section(w: &mut Writer, section: &Section) {
    if section.header.is_none() && section.paragraphs.is_empty() {
        w.empty("section", &[], 2);
        return;
    }
    w.open("section", &[], 2);
    if let Some(header) = &section.header {
        write_header(w, header);
    }
    for paragraph in &section.paragraphs {
        if paragraph.sentences.is_empty() {
            w.empty("p", &[], 3);
            continue;
        }
        w.open("p", &[], 3);
        for sentence in &paragraph.sentences {
            if sentence.tokens.is_empty() {
                w.empty("s", &[], 4);
                continue;
            }
            w.open("s", &[], 4);
            for token in &sentence.tokens {
                write_token(w, token);
            }
            w.close("s", 4);
        }
        w.close("p", 3);
    }
    w.close("section", 2);
}

fn write_header(w: &mut Writer, header: &Header) {
    let mut attrs = vec![("kind", header.kind.as_str().to_string())];
    if let Some(n) = header.number {
        attrs.push(("n", n.to_string()));
    }
    attrs.push(("o", header.char_offset.to_string()));
    if header.trailing_ws != " " {
        attrs.push(("ws", header.trailing_ws.clone()));
    }
    w.text_element("header", &attrs, &header.raw_text, 3);
}

fn write_token(w: &mut Writer, t: &Token) {
    let mut attrs = vec![
        ("i", t.global_index.to_string()),
        ("o", t.char_offset.to_string()),
    ];
    if let Some(pos) = t.pos {
        attrs.push(("pos", pos.as_str().to_string()));
    }
    if let Some(lemma) = &t.lemma {
        attrs.push(("lemma", lemma.clone()));
    }
    if let Some(ner) = t.ner {
        attrs.push(("ner", ner.as_str().to_string()));
    }
    if let Some(c) = t.character_id {
        attrs.push(("char", c.to_string()));
    }
    if let Some(q) = t.quote_id {
        attrs.push(("q", q.to_string()));
    }
    if t.trailing_ws != " " {
        attrs.push(("ws", t.trailing_ws.clone()));
    }
    w.text_element("t", &attrs, &t.text, 5);
}

fn push_char_ref(out: &mut String, c: char) {
    let _ = write!(out, "&#{};", c as u32);
}

pub(super) fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\n' | '\t' => out.push(c),
            c if c.is_control() => push_char_ref(&mut out, c),
            c => out.push(c),
        }
    }
    out
}

pub(super) fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c if c.is_control() => push_char_ref(&mut out, c),
            c => out.push(c),
        }
    }
    out
}
