//! Word lists and lookup tables shipped as plain-text data files.
//!
//! `.txt` files hold one entry per line; `.tsv` files hold tab-separated
//! columns. Blank lines and lines starting with `#` are ignored. Every table can
//! be replaced by a file of the same name in a lexicon directory.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::xml::{Gender, HeaderKind, Pos};

const ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");
const SPEECH_VERBS: &str = include_str!("../data/speech_verbs.txt");
const HONORIFICS: &str = include_str!("../data/honorifics.tsv");
const FIRST_NAMES: &str = include_str!("../data/first_names.tsv");
const LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.tsv");
const POS_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");
const DALE_CHALL: &str = include_str!("../data/dale_chall.txt");
const SPACHE: &str = include_str!("../data/spache.txt");
const STOP_WORDS: &str = include_str!("../data/stop_words.txt");
const HEADER_RULES: &str = include_str!("../data/header_rules.tsv");

static BUNDLED: LazyLock<Lexicons> =
    LazyLock::new(|| Lexicons::from_sources(&|_| None).expect("bundled lexicons are well-formed"));

#[derive(Debug, Clone, Default)]
pub struct HeaderRules {
    /// Lowercase keyword and the header kind it introduces.
    pub keywords: Vec<(String, HeaderKind)>,
    /// Lowercase words that form an unnumbered header on their own.
    pub unnumbered: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Lexicons {
    /// Exact-case abbreviation tokens, including the trailing period.
    pub abbreviations: HashSet<String>,
    pub speech_verbs: HashSet<String>,
    /// Honorific (exact case) to gender.
    pub honorifics: HashMap<String, Gender>,
    honorifics_folded: HashMap<String, Gender>,
    /// Lowercase first name to gender.
    pub first_names: HashMap<String, Gender>,
    pub lemma_exceptions: HashMap<String, String>,
    /// Lowercase word to tag.
    pub pos: HashMap<String, Pos>,
    pub dale_chall: HashSet<String>,
    pub spache: HashSet<String>,
    pub stop_words: HashSet<String>,
    pub header_rules: HeaderRules,
}

fn lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn word_set(src: &str, lowercase: bool) -> HashSet<String> {
    lines(src)
        .map(|(_, l)| {
            let w = l.trim();
            if lowercase {
                w.to_lowercase()
            } else {
                w.to_string()
            }
        })
        .collect()
}

fn pairs<'a>(name: &str, src: &'a str) -> Result<Vec<(&'a str, &'a str)>> {
    lines(src)
        .map(|(n, l)| {
            let mut cols = l.split('\t');
            match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => Ok((a.trim(), b.trim())),
                _ => Err(Error::Config(format!(
                    "{name}: line {n} needs two tab-separated columns"
                ))),
            }
        })
        .collect()
}

fn parse_gender(name: &str, value: &str) -> Result<Gender> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{name}: bad gender {value:?}")))
}

impl Lexicons {
    /// Tables compiled into the library.
    pub fn bundled() -> &'static Lexicons {
        &BUNDLED
    }

    /// Bundled tables, with any same-named file in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Lexicons> {
        let read = |file: &str| -> Option<std::io::Result<String>> {
            let path = dir.join(file);
            path.exists().then(|| std::fs::read_to_string(path))
        };
        let mut loaded: HashMap<&'static str, String> = HashMap::new();
        for file in FILES {
            if let Some(text) = read(file) {
                loaded.insert(file, text.map_err(|e| Error::io(dir.join(file), e))?);
            }
        }
        Self::from_sources(&|file| loaded.get(file).cloned())
    }

    fn from_sources(overrides: &dyn Fn(&str) -> Option<String>) -> Result<Lexicons> {
        let get = |file: &str, bundled: &'static str| -> std::borrow::Cow<'static, str> {
            match overrides(file) {
                Some(text) => text.into(),
                None => bundled.into(),
            }
        };

        let honorifics = {
            let src = get("honorifics.tsv", HONORIFICS);
            pairs("honorifics.tsv", &src)?
                .into_iter()
                .map(|(h, g)| Ok((h.to_string(), parse_gender("honorifics.tsv", g)?)))
                .collect::<Result<HashMap<_, _>>>()?
        };
        let first_names = {
            let src = get("first_names.tsv", FIRST_NAMES);
            pairs("first_names.tsv", &src)?
                .into_iter()
                .map(|(n, g)| Ok((n.to_lowercase(), parse_gender("first_names.tsv", g)?)))
                .collect::<Result<HashMap<_, _>>>()?
        };
        let lemma_exceptions = {
            let src = get("lemma_exceptions.tsv", LEMMA_EXCEPTIONS);
            pairs("lemma_exceptions.tsv", &src)?
                .into_iter()
                .map(|(a, b)| (a.to_lowercase(), b.to_string()))
                .collect()
        };
        let pos = {
            let src = get("pos_lexicon.tsv", POS_LEXICON);
            pairs("pos_lexicon.tsv", &src)?
                .into_iter()
                .map(|(w, t)| {
                    let tag = t
                        .parse::<Pos>()
                        .map_err(|_| Error::Config(format!("pos_lexicon.tsv: bad tag {t:?}")))?;
                    Ok((w.to_lowercase(), tag))
                })
                .collect::<Result<HashMap<_, _>>>()?
        };
        let header_rules = {
            let src = get("header_rules.tsv", HEADER_RULES);
            let mut rules = HeaderRules::default();
            for (n, line) in lines(&src) {
                let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
                match cols.as_slice() {
                    ["keyword", word, kind] => {
                        let kind = kind.parse::<HeaderKind>().map_err(|_| {
                            Error::Config(format!("header_rules.tsv: line {n}: bad kind {kind:?}"))
                        })?;
                        rules.keywords.push((word.to_lowercase(), kind));
                    }
                    ["unnumbered", word] => rules.unnumbered.push(word.to_lowercase()),
                    _ => {
                        return Err(Error::Config(format!(
                            "header_rules.tsv: line {n}: unrecognised rule"
                        )))
                    }
                }
            }
            rules
        };

        let honorifics_folded = honorifics
            .iter()
            .map(|(h, g)| (h.to_lowercase(), *g))
            .collect();

        Ok(Lexicons {
            honorifics_folded,
            abbreviations: word_set(&get("abbreviations.txt", ABBREVIATIONS), false),
            speech_verbs: word_set(&get("speech_verbs.txt", SPEECH_VERBS), true),
            honorifics,
            first_names,
            lemma_exceptions,
            pos,
            dale_chall: word_set(&get("dale_chall.txt", DALE_CHALL), true),
            spache: word_set(&get("spache.txt", SPACHE), true),
            stop_words: word_set(&get("stop_words.txt", STOP_WORDS), true),
            header_rules,
        })
    }

    pub fn is_abbreviation(&self, token: &str) -> bool {
        self.abbreviations.contains(token)
            || (token.len() == 2
                && token.ends_with('.')
                && token.starts_with(|c: char| c.is_ascii_uppercase() && c != 'I'))
    }

    /// Gender of a capitalized honorific; lowercase words ("brother") are not
    /// treated as titles.
    pub fn honorific_gender(&self, token: &str) -> Option<Gender> {
        if !token.starts_with(char::is_uppercase) {
            return None;
        }
        // "MR." in all-caps text
        self.honorifics
            .get(token)
            .or_else(|| self.honorifics_folded.get(&token.to_lowercase()))
            .copied()
    }

    pub fn is_honorific(&self, token: &str) -> bool {
        self.honorific_gender(token).is_some()
    }

    pub fn name_gender(&self, first_name: &str) -> Option<Gender> {
        self.first_names.get(&first_name.to_lowercase()).copied()
    }
}

const FILES: [&str; 10] = [
    "abbreviations.txt",
    "speech_verbs.txt",
    "honorifics.tsv",
    "first_names.tsv",
    "lemma_exceptions.tsv",
    "pos_lexicon.tsv",
    "dale_chall.txt",
    "spache.txt",
    "stop_words.txt",
    "header_rules.tsv",
];
