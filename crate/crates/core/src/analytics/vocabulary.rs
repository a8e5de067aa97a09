//! Words a book uses much more or much less often than the corpus does.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linguistic::is_word;
use crate::xml::AnnotatedBook;

/// Lemma counts of one book or of a whole corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaCounts {
    pub counts: HashMap<String, u64>,
    pub total: u64,
}

impl LemmaCounts {
    pub fn of_book(book: &AnnotatedBook) -> LemmaCounts {
        let mut out = LemmaCounts::default();
        for token in book.tokens().filter(|t| is_word(t)) {
            let lemma = token.lemma.clone().unwrap_or_else(|| token.text.to_lowercase());
            *out.counts.entry(lemma).or_default() += 1;
            out.total += 1;
        }
        out
    }

    pub fn merge(&mut self, other: &LemmaCounts) {
        for (w, c) in &other.counts {
            *self.counts.entry(w.clone()).or_default() += c;
        }
        self.total += other.total;
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// The `n` most frequent words, ties broken alphabetically.
    pub fn most_common(&self, n: usize) -> Vec<(&str, u64)> {
        let mut all: Vec<(&str, u64)> = self.counts.iter().map(|(w, &c)| (w.as_str(), c)).collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        all.truncate(n);
        all
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWord {
    pub word: String,
    /// In-book relative frequency over corpus relative frequency.
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeVocabulary {
    pub most: Vec<ScoredWord>,
    pub least: Vec<ScoredWord>,
    /// Common corpus words the book never uses, most frequent first.
    pub missing: Vec<String>,
}

pub fn representative_vocabulary(
    book: &LemmaCounts,
    corpus: &LemmaCounts,
    top_common: usize,
    list_len: usize,
) -> Result<RepresentativeVocabulary> {
    if corpus.total == 0 || corpus.counts.is_empty() {
        return Err(Error::Insufficient("corpus vocabulary is empty".into()));
    }
    let common = corpus.most_common(top_common);
    let mut scored = Vec::new();
    let mut missing = Vec::new();
    for (word, corpus_count) in common {
        let in_book = book.get(word);
        if in_book == 0 {
            missing.push(word.to_string());
            continue;
        }
        let book_rate = in_book as f64 / book.total as f64;
        let corpus_rate = corpus_count as f64 / corpus.total as f64;
        scored.push(ScoredWord {
            word: word.to_string(),
            score: book_rate / corpus_rate,
        });
    }
    // `common` is already in corpus-frequency order, so stable sorts keep
    // frequent words first among equal scores
    let mut most = scored.clone();
    most.sort_by(|a, b| b.score.total_cmp(&a.score));
    most.truncate(list_len);
    let mut least = scored;
    least.sort_by(|a, b| a.score.total_cmp(&b.score));
    least.truncate(list_len);
    missing.truncate(list_len);
    Ok(RepresentativeVocabulary { most, least, missing })
}
