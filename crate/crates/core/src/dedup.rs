//! Duplicate detection by title, author and MinHash content similarity.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub shingle_words: usize,
    pub num_hashes: usize,
    pub base_seed: u64,
    /// Group books whose normalized title and author both match.
    pub title_author_match: bool,
    /// Group books whose estimated content similarity reaches this value.
    pub content_threshold: f64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            shingle_words: 5,
            num_hashes: 128,
            base_seed: 0x5EED_B00C,
            title_author_match: true,
            content_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookFingerprint {
    pub normalized_title: String,
    pub normalized_author: String,
    pub minhash_signature: Vec<u64>,
}

/// Lowercases, strips diacritics and punctuation, collapses whitespace and
/// drops a leading article.
pub fn normalize_name(s: &str) -> String {
    let folded: String = s
        .nfd()
        .filter(|c| !unicode_normalization::char::is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let words: Vec<&str> = folded.split_whitespace().collect();
    let words = match words.first() {
        Some(&("a" | "an" | "the")) if words.len() > 1 => &words[1..],
        _ => &words[..],
    };
    words.join(" ")
}

/// Lowercase alphanumeric words of `text`.
pub fn normalized_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.nfd().filter(|c| !unicode_normalization::char::is_combining_mark(*c)).flat_map(char::to_lowercase).collect())
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-function seeds derived from the base seed.
fn hash_seeds(base_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Hashes of every distinct shingle of `words`.
pub fn shingle_hashes(words: &[String], k: usize) -> Vec<u64> {
    let mut hashes: Vec<u64> = words
        .windows(k)
        .map(|w| fnv1a(w.join(" ").as_bytes()))
        .collect();
    hashes.sort_unstable();
    hashes.dedup();
    hashes
}

pub fn minhash(shingles: &[u64], seeds: &[u64]) -> Vec<u64> {
    seeds
        .iter()
        .map(|&s| shingles.iter().map(|&x| mix(x ^ s)).min().unwrap_or(u64::MAX))
        .collect()
}

pub fn fingerprint(text: &str, title: &str, author: &str, cfg: &DedupConfig) -> Result<BookFingerprint> {
    let words = normalized_words(text);
    if words.len() < cfg.shingle_words {
        return Err(Error::TooShort {
            words: words.len(),
            needed: cfg.shingle_words,
        });
    }
    let shingles = shingle_hashes(&words, cfg.shingle_words);
    Ok(BookFingerprint {
        normalized_title: normalize_name(title),
        normalized_author: normalize_name(author),
        minhash_signature: minhash(&shingles, &hash_seeds(cfg.base_seed, cfg.num_hashes)),
    })
}

/// Share of signature positions holding the same minimum.
pub fn estimate_similarity(a: &BookFingerprint, b: &BookFingerprint) -> Result<f64> {
    let (x, y) = (&a.minhash_signature, &b.minhash_signature);
    if x.len() != y.len() {
        return Err(Error::SignatureLength {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Ok(1.0);
    }
    let same = x.iter().zip(y).filter(|(p, q)| p == q).count();
    Ok(same as f64 / x.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub title: Option<String>,
    pub author: Option<String>,
    pub year: Option<i32>,
    /// Body length in words; the longest copy represents a group.
    pub words: usize,
    pub fingerprint: Option<BookFingerprint>,
    /// Set on removed duplicates: the id of the copy that was kept.
    pub representative_of: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub entries: Vec<IndexEntry>,
}

impl CorpusIndex {
    pub fn kept(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.iter().filter(|e| e.representative_of.is_none())
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<CorpusIndex> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for line in std::io::BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if !line.trim().is_empty() {
                entries.push(serde_json::from_str(&line)?);
            }
        }
        Ok(CorpusIndex { entries })
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups duplicates and marks every member but one per group with the id of
/// the kept copy: the longest text, ties going to the smallest id.
pub fn dedup_corpus(index: &CorpusIndex, title_author_match: bool, content_threshold: f64) -> Result<CorpusIndex> {
    let entries = &index.entries;
    let n = entries.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let (Some(a), Some(b)) = (&entries[i].fingerprint, &entries[j].fingerprint) else {
                continue;
            };
            let same_name = title_author_match
                && !a.normalized_title.is_empty()
                && a.normalized_title == b.normalized_title
                && a.normalized_author == b.normalized_author;
            if same_name || estimate_similarity(a, b)? >= content_threshold {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut out = index.clone();
    for e in &mut out.entries {
        e.representative_of = None;
    }
    for members in groups.values() {
        let keep = *members
            .iter()
            .max_by(|&&a, &&b| {
                entries[a]
                    .words
                    .cmp(&entries[b].words)
                    .then(entries[b].id.cmp(&entries[a].id))
            })
            .unwrap();
        for &m in members {
            if m != keep {
                out.entries[m].representative_of = Some(entries[keep].id.clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn words(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn jaccard(a: &str, b: &str) -> f64 {
        let set = |t: &str| -> HashSet<String> {
            normalized_words(t).windows(5).map(|w| w.join(" ")).collect()
        };
        let (x, y) = (set(a), set(b));
        x.intersection(&y).count() as f64 / x.union(&y).count() as f64
    }

    #[test]
    fn names_normalize() {
        assert_eq!(normalize_name("The  Adventures of Tom Sawyer!"), "adventures of tom sawyer");
        assert_eq!(normalize_name("Les Misérables"), "les miserables");
        assert_eq!(normalize_name("A"), "a");
        assert_eq!(normalize_name("An Essay"), "essay");
    }

    #[test]
    fn identical_texts_identical_signatures() {
        let cfg = DedupConfig::default();
        let t = words(50, "w");
        let a = fingerprint(&t, "x", "y", &cfg).unwrap();
        let b = fingerprint(&t, "x", "y", &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.minhash_signature.len(), 128);
        assert_eq!(estimate_similarity(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn short_text_is_rejected() {
        assert!(matches!(
            fingerprint("one two three four", "", "", &DedupConfig::default()),
            Err(Error::TooShort { words: 4, needed: 5 })
        ));
    }

    #[test]
    fn half_shared_shingles() {
        let cfg = DedupConfig::default();
        let shared = words(204, "s");
        let a = format!("{} {}", words(204, "a"), shared);
        let b = format!("{} {}", shared, words(204, "b"));
        let exact = jaccard(&a, &b);
        let est = estimate_similarity(
            &fingerprint(&a, "", "", &cfg).unwrap(),
            &fingerprint(&b, "", "", &cfg).unwrap(),
        )
        .unwrap();
        assert!((est - exact).abs() <= 0.1, "estimate {est} exact {exact}");

        // exactly half: b's shingles are a subset holding half of a's
        let a = words(404, "h");
        let all: Vec<&str> = a.split(' ').collect();
        let b = all[..204].join(" ");
        let exact = jaccard(&a, &b);
        assert!((exact - 0.5).abs() < 1e-12, "{exact}");
        let est = estimate_similarity(
            &fingerprint(&a, "", "", &cfg).unwrap(),
            &fingerprint(&b, "", "", &cfg).unwrap(),
        )
        .unwrap();
        assert!((est - 0.5).abs() <= 0.1, "{est}");
    }

    #[test]
    fn disjoint_texts() {
        let cfg = DedupConfig::default();
        let a = fingerprint(&words(300, "a"), "", "", &cfg).unwrap();
        let b = fingerprint(&words(300, "b"), "", "", &cfg).unwrap();
        assert!(estimate_similarity(&a, &b).unwrap() <= 0.05);
        let mut c = a.clone();
        c.minhash_signature = a.minhash_signature.iter().map(|x| x ^ 1).collect();
        assert_eq!(estimate_similarity(&a, &c).unwrap(), 0.0);
        c.minhash_signature.pop();
        assert!(matches!(
            estimate_similarity(&a, &c),
            Err(Error::SignatureLength { left: 128, right: 127 })
        ));
    }

    fn entry(id: &str, title: &str, author: &str, text: &str) -> IndexEntry {
        IndexEntry {
            id: id.into(),
            title: Some(title.into()),
            author: Some(author.into()),
            year: None,
            words: normalized_words(text).len(),
            fingerprint: Some(fingerprint(text, title, author, &DedupConfig::default()).unwrap()),
            representative_of: None,
        }
    }

    #[test]
    fn exact_copies_grouped() {
        let t = words(100, "x");
        let index = CorpusIndex {
            entries: vec![entry("b", "T", "A", &t), entry("a", "T2", "A2", &t)],
        };
        let out = dedup_corpus(&index, true, 0.8).unwrap();
        assert_eq!(out.entries[0].representative_of.as_deref(), Some("a"));
        assert_eq!(out.entries[1].representative_of, None);
    }

    #[test]
    fn same_title_different_author_kept() {
        let index = CorpusIndex {
            entries: vec![
                entry("a", "Poems", "Smith", &words(100, "p")),
                entry("b", "Poems", "Jones", &words(100, "q")),
            ],
        };
        let out = dedup_corpus(&index, true, 0.8).unwrap();
        assert_eq!(out.kept().count(), 2);
    }

    #[test]
    fn near_duplicate_variant_grouped() {
        let sentences: Vec<String> = (0..200)
            .map(|i| format!("sentence {i} tells of word{i} and thing{i} here."))
            .collect();
        let full = sentences.join(" ");
        let variant: String = sentences
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 10 != 3)
            .map(|(_, s)| s.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let exact = jaccard(&full, &variant);
        assert!(exact >= 0.8, "{exact}");
        let index = CorpusIndex {
            entries: vec![entry("full", "X", "Y", &full), entry("var", "Z", "W", &variant)],
        };
        let out = dedup_corpus(&index, false, 0.8).unwrap();
        assert_eq!(out.entries[1].representative_of.as_deref(), Some("full"));
    }

    #[test]
    fn representative_stable_under_permutation() {
        let t = words(60, "z");
        let a = entry("b", "T", "A", &t);
        let b = entry("a", "T", "A", &t);
        let c = entry("c", "T", "A", &format!("{t} extra words"));
        let one = dedup_corpus(&CorpusIndex { entries: vec![a.clone(), b.clone(), c.clone()] }, true, 0.8).unwrap();
        let two = dedup_corpus(&CorpusIndex { entries: vec![c, b, a] }, true, 0.8).unwrap();
        let rep = |ix: &CorpusIndex| -> Vec<String> { ix.kept().map(|e| e.id.clone()).collect() };
        assert_eq!(rep(&one), vec!["c".to_string()]);
        assert_eq!(rep(&two), vec!["c".to_string()]);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.jsonl");
        let index = CorpusIndex {
            entries: vec![entry("a", "T", "A", &words(10, "k"))],
        };
        index.write_jsonl(&path).unwrap();
        assert_eq!(CorpusIndex::read_jsonl(&path).unwrap(), index);
    }
}
