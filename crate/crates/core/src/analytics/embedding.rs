//! Book vectors trained as distributed-bag-of-words paragraph vectors, and
//! nearest-neighbour search over them.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Lexicons;
use crate::linguistic::is_word;
use crate::xml::AnnotatedBook;

const STORE_MAGIC: &[u8; 4] = b"BSV1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Context window for the optional word-vector training.
    pub window: usize,
    pub epochs: usize,
    pub vocab_max: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    /// Also train skip-gram word vectors interleaved with the book vectors.
    pub train_words: bool,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 5,
            epochs: 10,
            vocab_max: 200_000,
            min_count: 100,
            negatives: 5,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            train_words: false,
            seed: 1,
        }
    }
}

/// The training input for one book.
#[derive(Debug, Clone, PartialEq)]
pub struct DocStream {
    pub id: String,
    pub corpus: String,
    pub words: Vec<String>,
}

/// Lowercase lemmas of the book's words with stop words and numbers removed.
pub fn lemma_stream(book: &AnnotatedBook, lex: &Lexicons) -> Vec<String> {
    book.tokens()
        .filter(|t| is_word(t))
        .map(|t| t.lemma.clone().unwrap_or_else(|| t.text.to_lowercase()))
        .filter(|l| l.chars().any(char::is_alphabetic) && !lex.stop_words.contains(l))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    pub words: Vec<String>,
    pub counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Words seen at least `min_count` times, keeping the `max` most frequent
    /// (ties alphabetical).
    pub fn build<'a>(streams: impl IntoIterator<Item = &'a [String]>, min_count: u64, max: usize) -> Vocabulary {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for stream in streams {
            for w in stream {
                *counts.entry(w.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        kept.truncate(max);
        let words: Vec<String> = kept.iter().map(|(w, _)| w.to_string()).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary {
            counts: kept.iter().map(|k| k.1).collect(),
            words,
            index,
        }
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Draws negative samples from the unigram distribution raised to 0.75.
struct NoiseSampler {
    cumulative: Vec<f64>,
}

impl NoiseSampler {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseSampler { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x.clamp(-30.0, 30.0)).exp())
}

/// One positive and `negatives` noise updates of `input` against the output
/// weights of `target`.
#[allow(clippy::too_many_arguments)]
fn train_pair(
    input: &mut [f32],
    target: usize,
    out: &mut [f32],
    dim: usize,
    noise: &NoiseSampler,
    negatives: usize,
    lr: f32,
    rng: &mut ChaCha8Rng,
    grad: &mut [f32],
) {
    grad.fill(0.0);
    for k in 0..=negatives {
        let (word, label) = if k == 0 {
            (target, 1.0)
        } else {
            let w = noise.sample(rng);
            if w == target {
                continue;
            }
            (w, 0.0)
        };
        let row = &mut out[word * dim..(word + 1) * dim];
        let dot: f32 = input.iter().zip(row.iter()).map(|(a, b)| a * b).sum();
        let g = (label - sigmoid(dot)) * lr;
        for i in 0..dim {
            grad[i] += g * row[i];
            row[i] += g * input[i];
        }
    }
    for (x, g) in input.iter_mut().zip(grad.iter()) {
        *x += g;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVector {
    pub id: String,
    pub corpus: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocVectors {
    pub dim: usize,
    pub entries: Vec<DocVector>,
}

/// Trains unit-length book vectors. Books are processed in id order, so the
/// result depends only on the set of books and the seed.
pub fn train_embeddings(docs: &[DocStream], cfg: &EmbeddingConfig) -> Result<DocVectors> {
    let mut docs: Vec<&DocStream> = docs.iter().collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    let vocab = Vocabulary::build(docs.iter().map(|d| d.words.as_slice()), cfg.min_count, cfg.vocab_max);
    if vocab.is_empty() {
        return Err(Error::Insufficient("vocabulary is empty after frequency filters".into()));
    }
    let dim = cfg.dim;
    let streams: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.words.iter().filter_map(|w| vocab.get(w)).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f32> {
        (0..n).map(|_| (rng.gen::<f32>() - 0.5) / dim as f32).collect()
    };
    let mut doc_vecs = init(docs.len() * dim, &mut rng);
    let mut word_vecs = if cfg.train_words {
        init(vocab.len() * dim, &mut rng)
    } else {
        Vec::new()
    };
    let mut out = vec![0.0f32; vocab.len() * dim];
    let noise = NoiseSampler::new(&vocab.counts);
    let mut grad = vec![0.0f32; dim];

    let per_epoch: usize = streams.iter().map(Vec::len).sum();
    let total = (per_epoch * cfg.epochs).max(1) as f64;
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        for (d, stream) in streams.iter().enumerate() {
            for (pos, &w) in stream.iter().enumerate() {
                let lr = (cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * step as f64 / total)
                    .max(cfg.min_learning_rate) as f32;
                step += 1;
                let doc = &mut doc_vecs[d * dim..(d + 1) * dim];
                train_pair(doc, w, &mut out, dim, &noise, cfg.negatives, lr, &mut rng, &mut grad);
                if cfg.train_words && cfg.window > 0 {
                    let reach = rng.gen_range(1..=cfg.window);
                    let lo = pos.saturating_sub(reach);
                    let hi = (pos + reach).min(stream.len() - 1);
                    for c in lo..=hi {
                        if c == pos {
                            continue;
                        }
                        let ctx = stream[c];
                        let input = &mut word_vecs[ctx * dim..(ctx + 1) * dim];
                        train_pair(input, w, &mut out, dim, &noise, cfg.negatives, lr, &mut rng, &mut grad);
                    }
                }
            }
        }
    }

    let entries = docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let mut v = doc_vecs[d * dim..(d + 1) * dim].to_vec();
            normalize(&mut v);
            DocVector {
                id: doc.id.clone(),
                corpus: doc.corpus.clone(),
                vector: v,
            }
        })
        .collect();
    Ok(DocVectors { dim, entries })
}

fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarBook {
    pub id: String,
    pub corpus: String,
    pub similarity: f64,
}

impl DocVectors {
    pub fn get(&self, id: &str) -> Option<&DocVector> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// The `k` books closest to `id` by cosine similarity, or the `k` closest
    /// in every corpus when `per_corpus` is set.
    pub fn most_similar(&self, id: &str, k: usize, per_corpus: bool) -> Result<Vec<SimilarBook>> {
        let query = self.get(id).ok_or_else(|| Error::UnknownBook(id.to_string()))?;
        let mut scored: Vec<SimilarBook> = self
            .entries
            .iter()
            .filter(|e| e.id != id)
            .map(|e| SimilarBook {
                id: e.id.clone(),
                corpus: e.corpus.clone(),
                similarity: cosine(&query.vector, &e.vector),
            })
            .collect();
        scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then(a.id.cmp(&b.id)));
        if !per_corpus {
            scored.truncate(k);
            return Ok(scored);
        }
        let mut groups: BTreeMap<String, Vec<SimilarBook>> = BTreeMap::new();
        for s in scored {
            let group = groups.entry(s.corpus.clone()).or_default();
            if group.len() < k {
                group.push(s);
            }
        }
        Ok(groups.into_values().flatten().collect())
    }

    /// Binary store: magic, dimension and count, then per book the id and
    /// corpus label as length-prefixed UTF-8 and `dim` little-endian f32s.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(STORE_MAGIC);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            for s in [&e.id, &e.corpus] {
                buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
                buf.extend_from_slice(s.as_bytes());
            }
            for x in &e.vector {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<DocVectors> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        let bad = || Error::Invariant(format!("{} is not a vector store", path.display()));
        let mut at = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = buf.get(at..at + n).ok_or_else(bad)?;
            at += n;
            Ok(s)
        };
        if take(4)? != STORE_MAGIC {
            return Err(bad());
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
        let dim = u32_at(take(4)?);
        let count = u32_at(take(4)?);
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let mut strings = Vec::new();
            for _ in 0..2 {
                let len = u32_at(take(4)?);
                strings.push(String::from_utf8(take(len)?.to_vec()).map_err(|_| bad())?);
            }
            let vector = take(dim * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let corpus = strings.pop().unwrap();
            let id = strings.pop().unwrap();
            entries.push(DocVector { id, corpus, vector });
        }
        Ok(DocVectors { dim, entries })
    }
}

/// Synthetic topic books for tests and experiments: book `i` mostly draws from
/// its own slice of the vocabulary.
pub fn synthetic_topic_corpus(books: usize, words_per_book: usize, seed: u64) -> Vec<DocStream> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topic_words = 30;
    let shared = 200;
    (0..books)
        .map(|b| {
            let words = (0..words_per_book)
                .map(|_| {
                    if rng.gen_bool(0.6) {
                        format!("t{}w{}", b, rng.gen_range(0..topic_words))
                    } else {
                        format!("s{}", rng.gen_range(0..shared))
                    }
                })
                .collect();
            DocStream {
                id: format!("book{b:02}"),
                corpus: "synthetic".into(),
                words,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 32,
            min_count: 1,
            seed,
            ..EmbeddingConfig::default()
        }
    }

    fn with_twin(mut docs: Vec<DocStream>) -> Vec<DocStream> {
        let mut twin = docs[3].clone();
        twin.id = "twin".into();
        docs.push(twin);
        docs
    }

    #[test]
    fn twins_are_nearest() {
        let docs = with_twin(synthetic_topic_corpus(10, 800, 7));
        let v = train_embeddings(&docs, &small_cfg(3)).unwrap();
        let top = v.most_similar("twin", 1, false).unwrap();
        assert_eq!(top[0].id, "book03");
        assert!(top[0].similarity >= 0.95, "{}", top[0].similarity);
    }

    #[test]
    fn vectors_are_unit_length() {
        let v = train_embeddings(&synthetic_topic_corpus(4, 200, 1), &small_cfg(1)).unwrap();
        for e in &v.entries {
            let n: f64 = e.vector.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
            assert!((cosine(&e.vector, &e.vector) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let docs = synthetic_topic_corpus(5, 200, 2);
        let mut reversed = docs.clone();
        reversed.reverse();
        let a = train_embeddings(&docs, &small_cfg(9)).unwrap();
        let b = train_embeddings(&reversed, &small_cfg(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.most_similar("book01", 3, false).unwrap(),
            b.most_similar("book01", 3, false).unwrap()
        );
    }

    #[test]
    fn rare_words_leave_the_vocabulary() {
        let streams = [vec!["a".to_string(), "a".into(), "b".into()]];
        let vocab = Vocabulary::build(streams.iter().map(|s| s.as_slice()), 2, 10);
        assert_eq!(vocab.words, ["a"]);
        assert!(vocab.get("b").is_none());
        let docs = [DocStream {
            id: "x".into(),
            corpus: "c".into(),
            words: streams[0].clone(),
        }];
        let cfg = EmbeddingConfig { min_count: 5, ..small_cfg(1) };
        assert!(matches!(train_embeddings(&docs, &cfg), Err(Error::Insufficient(_))));
    }

    #[test]
    fn neighbours_by_corpus_and_overflowing_k() {
        let mk = |id: &str, corpus: &str, v: [f32; 2]| DocVector {
            id: id.into(),
            corpus: corpus.into(),
            vector: v.to_vec(),
        };
        let store = DocVectors {
            dim: 2,
            entries: vec![
                mk("q", "g", [1.0, 0.0]),
                mk("a", "g", [0.9, 0.1]),
                mk("b", "h", [0.0, 1.0]),
                mk("c", "h", [0.7, 0.7]),
            ],
        };
        let all = store.most_similar("q", 10, false).unwrap();
        assert_eq!(all.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["a", "c", "b"]);
        let per = store.most_similar("q", 1, true).unwrap();
        assert_eq!(per.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert!(matches!(store.most_similar("zz", 1, false), Err(Error::UnknownBook(_))));
    }

    #[test]
    fn store_round_trip() {
        let v = train_embeddings(&synthetic_topic_corpus(3, 100, 4), &small_cfg(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.bin");
        v.write(&path).unwrap();
        assert_eq!(DocVectors::read(&path).unwrap(), v);
        std::fs::write(&path, b"nope").unwrap();
        assert!(DocVectors::read(&path).is_err());
    }
}
