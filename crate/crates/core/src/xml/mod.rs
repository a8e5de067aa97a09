//! The annotated book document: an in-memory tree plus its canonical XML form.
//!
//! Every pipeline phase reads and writes the same tree. Annotations that a phase
//! has not produced yet are simply absent (optional attributes), and the list of
//! completed phases is recorded in the document metadata.

mod query;
mod read;
mod write;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use query::{FlatToken, Node, Selector, TokenTable};
pub use read::{parse, parse_meta};
pub use write::serialize;

/// Coarse part-of-speech tagset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Adj,
    Verb,
    Adv,
    Pron,
    Intj,
    Adp,
    Conj,
    Det,
    Num,
    Punct,
    Other,
}

impl Pos {
    pub const ALL: [Pos; 12] = [
        Pos::Noun,
        Pos::Adj,
        Pos::Verb,
        Pos::Adv,
        Pos::Pron,
        Pos::Intj,
        Pos::Adp,
        Pos::Conj,
        Pos::Det,
        Pos::Num,
        Pos::Punct,
        Pos::Other,
    ];

    /// The eight categories reported in part-of-speech statistics.
    pub const ANALYZED: [Pos; 8] = [
        Pos::Noun,
        Pos::Adj,
        Pos::Verb,
        Pos::Adv,
        Pos::Pron,
        Pos::Intj,
        Pos::Adp,
        Pos::Conj,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Adj => "ADJ",
            Pos::Verb => "VERB",
            Pos::Adv => "ADV",
            Pos::Pron => "PRON",
            Pos::Intj => "INTJ",
            Pos::Adp => "ADP",
            Pos::Conj => "CONJ",
            Pos::Det => "DET",
            Pos::Num => "NUM",
            Pos::Punct => "PUNCT",
            Pos::Other => "OTHER",
        }
    }

    pub fn is_analyzed(self) -> bool {
        Pos::ANALYZED.contains(&self)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = Error;

    /// Accepts the coarse tags plus the Universal Dependencies names that
    /// differ from them (PROPN, AUX, CCONJ, SCONJ, PART, SYM, X).
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "NOUN" | "PROPN" => Pos::Noun,
            "ADJ" => Pos::Adj,
            "VERB" | "AUX" => Pos::Verb,
            "ADV" => Pos::Adv,
            "PRON" => Pos::Pron,
            "INTJ" => Pos::Intj,
            "ADP" => Pos::Adp,
            "CONJ" | "CCONJ" | "SCONJ" => Pos::Conj,
            "DET" => Pos::Det,
            "NUM" => Pos::Num,
            "PUNCT" => Pos::Punct,
            "OTHER" | "X" | "SYM" | "PART" => Pos::Other,
            other => return Err(Error::Invariant(format!("unknown POS tag {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Ner {
    Person,
    Other,
}

impl Ner {
    pub fn as_str(self) -> &'static str {
        match self {
            Ner::Person => "PERSON",
            Ner::Other => "OTHER",
        }
    }
}

impl FromStr for Ner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PERSON" | "PER" | "B-PER" | "I-PER" | "B-PERSON" | "I-PERSON" => Ok(Ner::Person),
            "OTHER" => Ok(Ner::Other),
            other => Err(Error::Invariant(format!("unknown NER tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    #[default]
    Unknown,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }

    /// Unknown is compatible with everything.
    pub fn compatible(self, other: Gender) -> bool {
        self == Gender::Unknown || other == Gender::Unknown || self == other
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            "unknown" => Ok(Gender::Unknown),
            other => Err(Error::Invariant(format!("unknown gender {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderKind {
    Chapter,
    Book,
    Part,
    Volume,
    Other,
}

impl HeaderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeaderKind::Chapter => "chapter",
            HeaderKind::Book => "book",
            HeaderKind::Part => "part",
            HeaderKind::Volume => "volume",
            HeaderKind::Other => "other",
        }
    }
}

impl FromStr for HeaderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chapter" => Ok(HeaderKind::Chapter),
            "book" => Ok(HeaderKind::Book),
            "part" => Ok(HeaderKind::Part),
            "volume" => Ok(HeaderKind::Volume),
            "other" => Ok(HeaderKind::Other),
            other => Err(Error::Invariant(format!("unknown header kind {other:?}"))),
        }
    }
}

/// Pipeline phases in their required order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Ingest,
    Segment,
    Linguistic,
    Characters,
    Analytics,
}

impl Phase {
    pub const ORDER: [Phase; 5] = [
        Phase::Ingest,
        Phase::Segment,
        Phase::Linguistic,
        Phase::Characters,
        Phase::Analytics,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Ingest => "ingest",
            Phase::Segment => "segment",
            Phase::Linguistic => "linguistic",
            Phase::Characters => "characters",
            Phase::Analytics => "analytics",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ORDER
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Invariant(format!("unknown phase {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseStamp {
    pub phase: Phase,
    /// Digest of the inputs and configuration the phase ran with.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Meta {
    pub source_id: String,
    pub corpus: String,
    pub title: Option<String>,
    pub author: Option<String>,
    pub year: Option<i32>,
    pub encoding: Option<String>,
    pub subjects: Vec<String>,
    pub phases: Vec<PhaseStamp>,
}

impl Meta {
    pub fn stamp(&self, phase: Phase) -> Option<&PhaseStamp> {
        self.phases.iter().find(|s| s.phase == phase)
    }

    /// Records `phase`, replacing an older stamp for it and dropping stamps of
    /// every later phase (their outputs are stale now).
    pub fn set_stamp(&mut self, phase: Phase, digest: impl Into<String>) {
        self.phases.retain(|s| s.phase < phase);
        self.phases.push(PhaseStamp {
            phase,
            digest: digest.into(),
        });
    }
}

/// Which kind of non-body text a block or span holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatterKind {
    GutenbergHeader,
    GutenbergFooter,
    FrontMatter,
    BackMatter,
}

impl MatterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatterKind::GutenbergHeader => "gutenberg_header",
            MatterKind::GutenbergFooter => "gutenberg_footer",
            MatterKind::FrontMatter => "front_matter",
            MatterKind::BackMatter => "back_matter",
        }
    }

    pub fn is_leading(self) -> bool {
        matches!(self, MatterKind::GutenbergHeader | MatterKind::FrontMatter)
    }
}

impl FromStr for MatterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gutenberg_header" => Ok(MatterKind::GutenbergHeader),
            "gutenberg_footer" => Ok(MatterKind::GutenbergFooter),
            "front_matter" => Ok(MatterKind::FrontMatter),
            "back_matter" => Ok(MatterKind::BackMatter),
            other => Err(Error::Invariant(format!("unknown matter kind {other:?}"))),
        }
    }
}

/// Non-body text kept alongside the body, with its byte range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatterBlock {
    pub kind: MatterKind,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub kind: HeaderKind,
    pub number: Option<u32>,
    pub raw_text: String,
    /// Byte offset of `raw_text` in the body text.
    pub char_offset: usize,
    /// Whitespace between the header line and the next piece of body text.
    pub trailing_ws: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub global_index: usize,
    /// Byte offset of the token in the body text.
    pub char_offset: usize,
    pub pos: Option<Pos>,
    pub lemma: Option<String>,
    pub ner: Option<Ner>,
    pub character_id: Option<u32>,
    pub quote_id: Option<u32>,
    /// Whitespace between this token and the next piece of body text.
    pub trailing_ws: String,
}

impl Token {
    pub fn new(text: impl Into<String>, global_index: usize, char_offset: usize) -> Self {
        Token {
            text: text.into(),
            global_index,
            char_offset,
            pos: None,
            lemma: None,
            ner: None,
            character_id: None,
            quote_id: None,
            trailing_ws: " ".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Paragraph {
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Section {
    pub header: Option<Header>,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Body {
    /// Whitespace preceding the first piece of body text.
    pub lead: String,
    /// The cleaned body text, kept only until the book is segmented.
    pub text: Option<String>,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterRecord {
    pub id: u32,
    pub canonical_name: String,
    pub gender: Gender,
    /// Alias surface forms with their mention counts.
    pub aliases: BTreeMap<String, usize>,
    /// Global index of the first token of every mention, ascending.
    pub mention_token_indices: Vec<usize>,
    pub gcc: usize,
    pub fpcc: usize,
    pub spcc: usize,
}

impl CharacterRecord {
    pub fn mention_count(&self) -> usize {
        self.mention_token_indices.len()
    }

    pub fn first_mention(&self) -> Option<usize> {
        self.mention_token_indices.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedBook {
    pub meta: Meta,
    pub front: Vec<MatterBlock>,
    pub back: Vec<MatterBlock>,
    pub body: Body,
    pub characters: Vec<CharacterRecord>,
}

/// Minimum mentions for a character to be kept.
pub const MIN_CHARACTER_MENTIONS: usize = 3;

impl AnnotatedBook {
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.body
            .sections
            .iter()
            .flat_map(|s| &s.paragraphs)
            .flat_map(|p| &p.sentences)
            .flat_map(|s| &s.tokens)
    }

    pub fn tokens_mut(&mut self) -> impl Iterator<Item = &mut Token> {
        self.body
            .sections
            .iter_mut()
            .flat_map(|s| &mut s.paragraphs)
            .flat_map(|p| &mut p.sentences)
            .flat_map(|s| &mut s.tokens)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.body
            .sections
            .iter()
            .flat_map(|s| &s.paragraphs)
            .flat_map(|p| &p.sentences)
    }

    pub fn token_count(&self) -> usize {
        self.tokens().count()
    }

    pub fn character(&self, id: u32) -> Option<&CharacterRecord> {
        self.characters.iter().find(|c| c.id == id)
    }

    pub fn has_phase(&self, phase: Phase) -> bool {
        self.meta.stamp(phase).is_some()
    }

    /// Rebuilds the body text from header lines, tokens and recorded whitespace.
    pub fn reconstruct_body_text(&self) -> String {
        if let Some(text) = &self.body.text {
            return format!("{}{}", self.body.lead, text);
        }
        let mut out = self.body.lead.clone();
        for section in &self.body.sections {
            if let Some(h) = &section.header {
                out.push_str(&h.raw_text);
                out.push_str(&h.trailing_ws);
            }
            for token in section
                .paragraphs
                .iter()
                .flat_map(|p| &p.sentences)
                .flat_map(|s| &s.tokens)
            {
                out.push_str(&token.text);
                out.push_str(&token.trailing_ws);
            }
        }
        out
    }

    /// Checks the structural invariants the serializer relies on.
    pub fn validate(&self) -> Result<()> {
        let mut previous: Option<usize> = None;
        for token in self.tokens() {
            if token.text.is_empty() {
                return Err(Error::Invariant(format!(
                    "token {} has empty text",
                    token.global_index
                )));
            }
            if let Some(prev) = previous {
                if token.global_index <= prev {
                    return Err(Error::Invariant(format!(
                        "token index {} does not follow {}",
                        token.global_index, prev
                    )));
                }
            }
            previous = Some(token.global_index);
            if let Some(id) = token.character_id {
                if self.character(id).is_none() {
                    return Err(Error::Invariant(format!(
                        "token {} references missing character {}",
                        token.global_index, id
                    )));
                }
            }
        }
        for section in &self.body.sections {
            if let Some(Header {
                number: Some(0), ..
            }) = section.header
            {
                return Err(Error::Invariant("header number must be >= 1".into()));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.characters {
            if !ids.insert(c.id) {
                return Err(Error::Invariant(format!("duplicate character id {}", c.id)));
            }
            if c.mention_count() < MIN_CHARACTER_MENTIONS {
                return Err(Error::Invariant(format!(
                    "character {} has {} mentions, need at least {}",
                    c.id,
                    c.mention_count(),
                    MIN_CHARACTER_MENTIONS
                )));
            }
            if !c.aliases.contains_key(&c.canonical_name) {
                return Err(Error::Invariant(format!(
                    "character {} canonical name {:?} is not an alias",
                    c.id, c.canonical_name
                )));
            }
            if c.mention_token_indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Invariant(format!(
                    "character {} mentions are not strictly ascending",
                    c.id
                )));
            }
            let alias_total: usize = c.aliases.values().sum();
            if alias_total != c.mention_count() {
                return Err(Error::Invariant(format!(
                    "character {} alias counts sum to {} but it has {} mentions",
                    c.id,
                    alias_total,
                    c.mention_count()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pos_parses_universal_tags() {
        assert_eq!("PROPN".parse::<Pos>().unwrap(), Pos::Noun);
        assert_eq!("sconj".parse::<Pos>().unwrap(), Pos::Conj);
        assert!("BOGUS".parse::<Pos>().is_err());
    }

    #[test]
    fn set_stamp_drops_later_phases() {
        let mut meta = Meta::default();
        meta.set_stamp(Phase::Ingest, "a");
        meta.set_stamp(Phase::Segment, "b");
        meta.set_stamp(Phase::Linguistic, "c");
        meta.set_stamp(Phase::Segment, "d");
        let phases: Vec<_> = meta.phases.iter().map(|s| s.phase).collect();
        assert_eq!(phases, vec![Phase::Ingest, Phase::Segment]);
        assert_eq!(meta.stamp(Phase::Segment).unwrap().digest, "d");
    }

    #[test]
    fn gender_compatibility() {
        assert!(Gender::Unknown.compatible(Gender::Male));
        assert!(Gender::Female.compatible(Gender::Female));
        assert!(!Gender::Male.compatible(Gender::Female));
    }
}
