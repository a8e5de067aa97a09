use std::collections::BTreeMap;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{
    AnnotatedBook, Body, CharacterRecord, Header, MatterBlock, Meta, Paragraph, PhaseStamp,
    Section, Sentence, Token,
};
use crate::error::{Error, Result};

/// Parses a document in the canonical XML format.
///
/// Unknown elements and attributes are rejected with their line number, and the
/// resulting tree must satisfy [`AnnotatedBook::validate`].
pub fn parse(xml: &str) -> Result<AnnotatedBook> {
    let root = build_tree(xml)?;
    let ctx = Ctx { src: xml };
    let book = ctx.book(&root)?;
    book.validate()?;
    Ok(book)
}

/// Reads only the `<meta>` element of a document, skipping the rest. Useful
/// for checking phase stamps without loading a whole annotated book.
pub fn parse_meta(xml: &str) -> Result<Meta> {
    let mut reader = Reader::from_str(xml);
    let end = loop {
        let event = reader
            .read_event()
            .map_err(|e| xml_error(xml, reader.buffer_position() as usize, e.to_string()))?;
        match event {
            Event::Empty(e) if e.name().as_ref() == b"meta" => break reader.buffer_position() as usize,
            Event::End(e) if e.name().as_ref() == b"meta" => break reader.buffer_position() as usize,
            Event::Eof => return Err(xml_error(xml, xml.len(), "missing <meta>")),
            _ => {}
        }
    };
    let head = format!("{}\n</book>\n", &xml[..end]);
    let root = build_tree(&head)?;
    let ctx = Ctx { src: &head };
    let meta = root
        .children
        .iter()
        .find(|c| c.name == "meta")
        .ok_or_else(|| xml_error(xml, 0, "missing <meta>"))?;
    ctx.meta(meta)
}

/// Generic element tree, built first so conversion can report positions.
struct Elem {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Elem>,
    text: String,
    offset: usize,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let col = offset - before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

fn xml_error(src: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, column) = line_col(src, offset);
    Error::Xml {
        line,
        column,
        message: message.into(),
    }
}

fn start_elem(src: &str, e: &BytesStart<'_>, offset: usize) -> Result<Elem> {
    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| xml_error(src, offset, err.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| xml_error(src, offset, err.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Elem {
        name,
        attrs,
        children: Vec::new(),
        text: String::new(),
        offset,
    })
}

fn build_tree(src: &str) -> Result<Elem> {
    let mut reader = Reader::from_str(src);
    reader.config_mut().trim_text(false);
    let mut stack: Vec<Elem> = Vec::new();
    let mut root: Option<Elem> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|err| xml_error(src, reader.error_position() as usize, err.to_string()))?;
        match event {
            Event::Start(e) => stack.push(start_elem(src, &e, offset)?),
            Event::Empty(e) => {
                let elem = start_elem(src, &e, offset)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(elem),
                    None if root.is_none() => root = Some(elem),
                    None => return Err(xml_error(src, offset, "multiple root elements")),
                }
            }
            Event::End(_) => {
                let elem = stack
                    .pop()
                    .ok_or_else(|| xml_error(src, offset, "unbalanced end tag"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(elem),
                    None if root.is_none() => root = Some(elem),
                    None => return Err(xml_error(src, offset, "multiple root elements")),
                }
            }
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|err| xml_error(src, offset, err.to_string()))?;
                match stack.last_mut() {
                    Some(parent) => parent.text.push_str(&text),
                    None if text.trim().is_empty() => {}
                    None => return Err(xml_error(src, offset, "text outside the root element")),
                }
            }
            Event::CData(c) => {
                let text = String::from_utf8_lossy(&c.into_inner()).into_owned();
                match stack.last_mut() {
                    Some(parent) => parent.text.push_str(&text),
                    None => return Err(xml_error(src, offset, "CDATA outside the root element")),
                }
            }
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Eof => break,
        }
    }
    if let Some(open) = stack.last() {
        return Err(xml_error(
            src,
            src.len(),
            format!("unexpected end of input inside <{}>", open.name),
        ));
    }
    root.ok_or_else(|| xml_error(src, src.len(), "document has no root element"))
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err(&self, elem: &Elem, message: impl Into<String>) -> Error {
        xml_error(self.src, elem.offset, message)
    }

    fn check_attrs(&self, elem: &Elem, allowed: &[&str]) -> Result<()> {
        for (key, _) in &elem.attrs {
            if !allowed.contains(&key.as_str()) {
                return Err(self.err(
                    elem,
                    format!("unknown attribute {key:?} on <{}>", elem.name),
                ));
            }
        }
        Ok(())
    }

    fn no_text(&self, elem: &Elem) -> Result<()> {
        if elem.text.trim().is_empty() {
            Ok(())
        } else {
            Err(self.err(elem, format!("unexpected text inside <{}>", elem.name)))
        }
    }

    fn no_children(&self, elem: &Elem) -> Result<()> {
        match elem.children.first() {
            None => Ok(()),
            Some(child) => Err(self.err(
                child,
                format!("unexpected element <{}> inside <{}>", child.name, elem.name),
            )),
        }
    }

    fn attr<'e>(&self, elem: &'e Elem, key: &str) -> Option<&'e str> {
        elem.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn required<'e>(&self, elem: &'e Elem, key: &str) -> Result<&'e str> {
        self.attr(elem, key).ok_or_else(|| {
            self.err(
                elem,
                format!("missing attribute {key:?} on <{}>", elem.name),
            )
        })
    }

    fn parse_attr<T: FromStr>(&self, elem: &Elem, key: &str) -> Result<Option<T>> {
        match self.attr(elem, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                self.err(
                    elem,
                    format!("invalid value {v:?} for {key:?} on <{}>", elem.name),
                )
            }),
        }
    }

    fn parse_required<T: FromStr>(&self, elem: &Elem, key: &str) -> Result<T> {
        self.parse_attr(elem, key)?.ok_or_else(|| {
            self.err(
                elem,
                format!("missing attribute {key:?} on <{}>", elem.name),
            )
        })
    }

    fn unknown(&self, elem: &Elem, parent: &str) -> Error {
        self.err(
            elem,
            format!("unknown element <{}> inside <{}>", elem.name, parent),
        )
    }

    fn book(&self, root: &Elem) -> Result<AnnotatedBook> {
        if root.name != "book" {
            return Err(self.err(root, format!("expected <book>, found <{}>", root.name)));
        }
        self.check_attrs(root, &[])?;
        self.no_text(root)?;
        let mut book = AnnotatedBook::default();
        let mut seen_meta = false;
        for child in &root.children {
            match child.name.as_str() {
                "meta" => {
                    book.meta = self.meta(child)?;
                    seen_meta = true;
                }
                "front" => book.front.push(self.matter(child)?),
                "back" => book.back.push(self.matter(child)?),
                "characters" => book.characters = self.characters(child)?,
                "body" => book.body = self.body(child)?,
                _ => return Err(self.unknown(child, "book")),
            }
        }
        if !seen_meta {
            return Err(self.err(root, "missing <meta>"));
        }
        Ok(book)
    }

    fn meta(&self, elem: &Elem) -> Result<Meta> {
        self.check_attrs(
            elem,
            &["source", "corpus", "title", "author", "year", "encoding"],
        )?;
        self.no_text(elem)?;
        let mut meta = Meta {
            source_id: self.required(elem, "source")?.to_string(),
            corpus: self.required(elem, "corpus")?.to_string(),
            title: self.attr(elem, "title").map(str::to_string),
            author: self.attr(elem, "author").map(str::to_string),
            year: self.parse_attr(elem, "year")?,
            encoding: self.attr(elem, "encoding").map(str::to_string),
            ..Meta::default()
        };
        for child in &elem.children {
            match child.name.as_str() {
                "subject" => {
                    self.check_attrs(child, &[])?;
                    self.no_children(child)?;
                    meta.subjects.push(child.text.clone());
                }
                "phase" => {
                    self.check_attrs(child, &["name", "digest"])?;
                    self.no_children(child)?;
                    self.no_text(child)?;
                    meta.phases.push(PhaseStamp {
                        phase: self.parse_required(child, "name")?,
                        digest: self.required(child, "digest")?.to_string(),
                    });
                }
                _ => return Err(self.unknown(child, "meta")),
            }
        }
        Ok(meta)
    }

    fn matter(&self, elem: &Elem) -> Result<MatterBlock> {
        self.check_attrs(elem, &["kind", "start", "end"])?;
        self.no_children(elem)?;
        Ok(MatterBlock {
            kind: self.parse_required(elem, "kind")?,
            start: self.parse_required(elem, "start")?,
            end: self.parse_required(elem, "end")?,
            text: elem.text.clone(),
        })
    }

    fn characters(&self, elem: &Elem) -> Result<Vec<CharacterRecord>> {
        self.check_attrs(elem, &[])?;
        self.no_text(elem)?;
        let mut out = Vec::new();
        for child in &elem.children {
            if child.name != "character" {
                return Err(self.unknown(child, "characters"));
            }
            out.push(self.character(child)?);
        }
        Ok(out)
    }

    fn character(&self, elem: &Elem) -> Result<CharacterRecord> {
        self.check_attrs(
            elem,
            &["id", "name", "gender", "count", "gcc", "fpcc", "spcc"],
        )?;
        self.no_text(elem)?;
        let mut aliases = BTreeMap::new();
        let mut mentions = Vec::new();
        for child in &elem.children {
            match child.name.as_str() {
                "name" => {
                    self.check_attrs(child, &["count"])?;
                    self.no_children(child)?;
                    aliases.insert(child.text.clone(), self.parse_required(child, "count")?);
                }
                "mentions" => {
                    self.check_attrs(child, &[])?;
                    self.no_children(child)?;
                    for part in child.text.split_whitespace() {
                        mentions.push(part.parse::<usize>().map_err(|_| {
                            self.err(child, format!("invalid mention index {part:?}"))
                        })?);
                    }
                }
                _ => return Err(self.unknown(child, "character")),
            }
        }
        let count: usize = self.parse_required(elem, "count")?;
        if count != mentions.len() {
            return Err(self.err(
                elem,
                format!(
                    "count attribute {count} disagrees with {} listed mentions",
                    mentions.len()
                ),
            ));
        }
        Ok(CharacterRecord {
            id: self.parse_required(elem, "id")?,
            canonical_name: self.required(elem, "name")?.to_string(),
            gender: self.parse_required(elem, "gender")?,
            aliases,
            mention_token_indices: mentions,
            gcc: self.parse_required(elem, "gcc")?,
            fpcc: self.parse_required(elem, "fpcc")?,
            spcc: self.parse_required(elem, "spcc")?,
        })
    }

    fn body(&self, elem: &Elem) -> Result<Body> {
        self.check_attrs(elem, &["lead"])?;
        self.no_text(elem)?;
        let mut body = Body {
            lead: self.attr(elem, "lead").unwrap_or("").to_string(),
            ..Body::default()
        };
        for child in &elem.children {
            match child.name.as_str() {
                "text" => {
                    self.check_attrs(child, &[])?;
                    self.no_children(child)?;
                    body.text = Some(child.text.clone());
                }
                "section" => body.sections.push(self.section(child)?),
                _ => return Err(self.unknown(child, "body")),
            }
        }
        Ok(body)
    }

    fn section(&self, elem: &Elem) -> Result<Section> {
        self.check_attrs(elem, &[])?;
        self.no_text(elem)?;
        let mut section = Section::default();
        for child in &elem.children {
            match child.name.as_str() {
                "header" if section.header.is_none() && section.paragraphs.is_empty() => {
                    section.header = Some(self.header(child)?);
                }
                "p" => section.paragraphs.push(self.paragraph(child)?),
                _ => return Err(self.unknown(child, "section")),
            }
        }
        Ok(section)
    }

    fn header(&self, elem: &Elem) -> Result<Header> {
        self.check_attrs(elem, &["kind", "n", "o", "ws"])?;
        self.no_children(elem)?;
        Ok(Header {
            kind: self.parse_required(elem, "kind")?,
            number: self.parse_attr(elem, "n")?,
            raw_text: elem.text.clone(),
            char_offset: self.parse_required(elem, "o")?,
            trailing_ws: self.attr(elem, "ws").unwrap_or(" ").to_string(),
        })
    }

    fn paragraph(&self, elem: &Elem) -> Result<Paragraph> {
        self.check_attrs(elem, &[])?;
        self.no_text(elem)?;
        let mut p = Paragraph::default();
        for child in &elem.children {
            if child.name != "s" {
                return Err(self.unknown(child, "p"));
            }
            self.check_attrs(child, &[])?;
            self.no_text(child)?;
            let mut sentence = Sentence::default();
            for t in &child.children {
                if t.name != "t" {
                    return Err(self.unknown(t, "s"));
                }
                sentence.tokens.push(self.token(t)?);
            }
            p.sentences.push(sentence);
        }
        Ok(p)
    }

    fn token(&self, elem: &Elem) -> Result<Token> {
        self.check_attrs(
            elem,
            &["i", "o", "pos", "lemma", "ner", "char", "q", "ws"],
        )?;
        self.no_children(elem)?;
        Ok(Token {
            text: elem.text.clone(),
            global_index: self.parse_required(elem, "i")?,
            char_offset: self.parse_required(elem, "o")?,
            pos: self.parse_attr(elem, "pos")?,
            lemma: self.attr(elem, "lemma").map(str::to_string),
            ner: self.parse_attr(elem, "ner")?,
            character_id: self.parse_attr(elem, "char")?,
            quote_id: self.parse_attr(elem, "q")?,
            trailing_ws: self.attr(elem, "ws").unwrap_or(" ").to_string(),
        })
    }
}
