//! Random annotated books that satisfy the model's invariants. Shared by the
//! XML round-trip property test and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;

use bookscope::xml::{
    AnnotatedBook, Body, CharacterRecord, Gender, Header, HeaderKind, MatterBlock, MatterKind,
    Meta, Ner, Paragraph, Phase, PhaseStamp, Pos, Section, Sentence, Token,
};
use rand::seq::SliceRandom;
use rand::Rng;

/// Characters strings are drawn from: markup-significant ones, non-ASCII,
/// and control characters other than NUL (which XML cannot carry at all).
const PALETTE: &[char] = &[
    'a', 'b', 'e', 'z', 'Q', '0', '7', ' ', ' ', '.', ',', '\'', '"', '<', '>', '&', ';', '#',
    ']', '=', 'é', 'ß', 'Ж', '漢', '😀', '\u{2014}', '\t', '\n', '\r', '\u{1}', '\u{1f}',
    '\u{7f}', '\u{85}', '\u{a0}',
];
const WS: &[&str] = &["", " ", " ", "  ", "\n", "\n\n", "\t", " \r\n", "\u{a0}"];

pub fn text(rng: &mut impl Rng, max: usize) -> String {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| *PALETTE.choose(rng).unwrap()).collect()
}

fn non_empty(rng: &mut impl Rng, max: usize) -> String {
    let mut s = text(rng, max);
    if s.is_empty() {
        s.push(*PALETTE.choose(rng).unwrap());
    }
    s
}

fn ws(rng: &mut impl Rng) -> String {
    WS.choose(rng).unwrap().to_string()
}

fn maybe<R: Rng, T>(rng: &mut R, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    if rng.gen_bool(0.5) {
        Some(f(rng))
    } else {
        None
    }
}

fn meta(rng: &mut impl Rng) -> Meta {
    let mut phases = Vec::new();
    for phase in Phase::ORDER {
        if rng.gen_bool(0.6) {
            phases.push(PhaseStamp {
                phase,
                digest: format!("{:016x}", rng.gen::<u64>()),
            });
        } else {
            break;
        }
    }
    Meta {
        source_id: non_empty(rng, 8),
        corpus: text(rng, 6),
        title: maybe(rng, |r| text(r, 20)),
        author: maybe(rng, |r| text(r, 12)),
        year: maybe(rng, |r| r.gen_range(-500..2100)),
        encoding: maybe(rng, |r| ["utf-8", "latin-1"].choose(r).unwrap().to_string()),
        subjects: (0..rng.gen_range(0..3)).map(|_| text(rng, 10)).collect(),
        phases,
    }
}

fn matter(rng: &mut impl Rng) -> MatterBlock {
    let kinds = [
        MatterKind::GutenbergHeader,
        MatterKind::GutenbergFooter,
        MatterKind::FrontMatter,
        MatterKind::BackMatter,
    ];
    let start = rng.gen_range(0..10_000);
    MatterBlock {
        kind: *kinds.choose(rng).unwrap(),
        start,
        end: start + rng.gen_range(0..500),
        text: text(rng, 40),
    }
}

fn token(rng: &mut impl Rng, index: usize, character_ids: &[u32]) -> Token {
    let mut t = Token::new(non_empty(rng, 6), index, rng.gen_range(0..100_000));
    t.pos = maybe(rng, |r| *Pos::ALL.choose(r).unwrap());
    t.lemma = maybe(rng, |r| text(r, 6));
    t.ner = maybe(rng, |r| *[Ner::Person, Ner::Other].choose(r).unwrap());
    if !character_ids.is_empty() && rng.gen_bool(0.2) {
        t.character_id = Some(*character_ids.choose(rng).unwrap());
    }
    t.quote_id = maybe(rng, |r| r.gen_range(0..50));
    t.trailing_ws = ws(rng);
    t
}

fn character(rng: &mut impl Rng, id: u32) -> CharacterRecord {
    let mentions = rng.gen_range(3..12);
    let mut indices: Vec<usize> = (0..mentions * 3).collect();
    indices.shuffle(rng);
    indices.truncate(mentions);
    indices.sort_unstable();
    let canonical = non_empty(rng, 10);
    let mut aliases = BTreeMap::new();
    let mut left = mentions;
    while left > 0 {
        let name = if aliases.is_empty() { canonical.clone() } else { non_empty(rng, 10) };
        let n = rng.gen_range(1..=left);
        *aliases.entry(name).or_insert(0) += n;
        left -= n;
    }
    CharacterRecord {
        id,
        canonical_name: canonical,
        gender: *[Gender::Male, Gender::Female, Gender::Unknown].choose(rng).unwrap(),
        aliases,
        mention_token_indices: indices,
        gcc: rng.gen_range(0..20),
        fpcc: rng.gen_range(0..20),
        spcc: rng.gen_range(0..20),
    }
}

/// A book with up to a few sections of random tokens and random characters.
pub fn random_book(rng: &mut impl Rng) -> AnnotatedBook {
    let mut ids: Vec<u32> = (1..40).collect();
    ids.shuffle(rng);
    ids.truncate(rng.gen_range(0..4));
    let characters: Vec<CharacterRecord> = ids.iter().map(|&id| character(rng, id)).collect();

    let mut index = 0;
    let mut sections = Vec::new();
    for _ in 0..rng.gen_range(0..4) {
        let header = rng.gen_bool(0.6).then(|| Header {
            kind: *[
                HeaderKind::Chapter,
                HeaderKind::Book,
                HeaderKind::Part,
                HeaderKind::Volume,
                HeaderKind::Other,
            ]
            .choose(rng)
            .unwrap(),
            number: rng.gen_bool(0.7).then(|| rng.gen_range(1..4000)),
            raw_text: non_empty(rng, 20),
            char_offset: rng.gen_range(0..100_000),
            trailing_ws: ws(rng),
        });
        let mut paragraphs = Vec::new();
        for _ in 0..rng.gen_range(0..3) {
            let mut sentences = Vec::new();
            for _ in 0..rng.gen_range(0..3) {
                let mut tokens = Vec::new();
                for _ in 0..rng.gen_range(0..6) {
                    index += rng.gen_range(1..3);
                    tokens.push(token(rng, index, &ids));
                }
                sentences.push(Sentence { tokens });
            }
            paragraphs.push(Paragraph { sentences });
        }
        sections.push(Section { header, paragraphs });
    }
    let body_text = (sections.is_empty() && rng.gen_bool(0.5)).then(|| text(rng, 60));
    AnnotatedBook {
        meta: meta(rng),
        front: (0..rng.gen_range(0..3)).map(|_| matter(rng)).collect(),
        back: (0..rng.gen_range(0..3)).map(|_| matter(rng)).collect(),
        body: Body {
            lead: ws(rng),
            text: body_text,
            sections,
        },
        characters,
    }
}
