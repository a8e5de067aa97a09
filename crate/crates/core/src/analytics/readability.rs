//! The eight readability formulas.

use serde::{Deserialize, Serialize};

use crate::lexicon::Lexicons;
use crate::linguistic::{count_syllables, is_word};
use crate::xml::AnnotatedBook;

/// Words per Linsear Write sample.
pub const LINSEAR_SAMPLE: usize = 100;

/// Surface counts every formula is computed from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TextCounts {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
    pub letters: usize,
    /// Words of three or more syllables.
    pub polysyllables: usize,
    /// Polysyllables that are not capitalized mid-sentence.
    pub complex_words: usize,
    /// Words outside the Dale-Chall familiar list.
    pub dale_unfamiliar: usize,
    /// Words outside the Spache familiar list.
    pub spache_unfamiliar: usize,
    /// Mean Linsear Write raw score over the samples.
    pub linsear_raw: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Readability {
    pub flesch_reading_ease: Option<f64>,
    pub dale_chall: Option<f64>,
    pub automated_readability_index: Option<f64>,
    pub coleman_liau: Option<f64>,
    pub gunning_fog: Option<f64>,
    pub smog: Option<f64>,
    pub spache: Option<f64>,
    pub linsear_write: Option<f64>,
}

impl Readability {
    pub const NAMES: [&'static str; 8] = [
        "flesch_reading_ease",
        "dale_chall",
        "automated_readability_index",
        "coleman_liau",
        "gunning_fog",
        "smog",
        "spache",
        "linsear_write",
    ];

    pub fn values(&self) -> [Option<f64>; 8] {
        [
            self.flesch_reading_ease,
            self.dale_chall,
            self.automated_readability_index,
            self.coleman_liau,
            self.gunning_fog,
            self.smog,
            self.spache,
            self.linsear_write,
        ]
    }

    /// Metrics that could not be computed (no words or sentences).
    pub fn undefined(&self) -> Vec<&'static str> {
        Self::NAMES
            .iter()
            .zip(self.values())
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| *n)
            .collect()
    }
}

struct Word<'a> {
    text: &'a str,
    lemma: Option<&'a str>,
    sentence: usize,
    sentence_initial: bool,
}

fn familiar(word: &Word, list: &std::collections::HashSet<String>) -> bool {
    let lower = word.text.to_lowercase();
    list.contains(&lower) || word.lemma.is_some_and(|l| list.contains(l))
}

pub fn count(book: &AnnotatedBook, lex: &Lexicons) -> TextCounts {
    let mut words = Vec::new();
    let mut sentences = 0;
    for sentence in book.sentences() {
        let before = words.len();
        for token in sentence.tokens.iter().filter(|t| is_word(t)) {
            words.push(Word {
                text: &token.text,
                lemma: token.lemma.as_deref(),
                sentence: sentences,
                sentence_initial: words.len() == before,
            });
        }
        if words.len() > before {
            sentences += 1;
        }
    }

    let mut c = TextCounts {
        words: words.len(),
        sentences,
        ..TextCounts::default()
    };
    let syllables: Vec<usize> = words.iter().map(|w| count_syllables(w.text)).collect();
    for (w, &syl) in words.iter().zip(&syllables) {
        c.syllables += syl;
        c.letters += w.text.chars().filter(|ch| ch.is_alphabetic()).count();
        if syl >= 3 {
            c.polysyllables += 1;
            let proper = !w.sentence_initial && w.text.starts_with(char::is_uppercase);
            if !proper {
                c.complex_words += 1;
            }
        }
        if !familiar(w, &lex.dale_chall) {
            c.dale_unfamiliar += 1;
        }
        if !familiar(w, &lex.spache) {
            c.spache_unfamiliar += 1;
        }
    }
    c.linsear_raw = linsear_raw(&words, &syllables);
    c
}

/// Mean raw Linsear Write score over consecutive samples of
/// [`LINSEAR_SAMPLE`] words; a short trailing sample is used only when it is
/// the only one.
fn linsear_raw(words: &[Word], syllables: &[usize]) -> Option<f64> {
    if words.is_empty() {
        return None;
    }
    let full = words.len() / LINSEAR_SAMPLE;
    let samples = full.max(1);
    let mut total = 0.0;
    for s in 0..samples {
        let lo = s * LINSEAR_SAMPLE;
        let hi = if full == 0 { words.len() } else { lo + LINSEAR_SAMPLE };
        let mut score = 0usize;
        for &syl in &syllables[lo..hi] {
            score += if syl >= 3 { 3 } else { 1 };
        }
        let sentences = words[hi - 1].sentence - words[lo].sentence + 1;
        total += score as f64 / sentences as f64;
    }
    Some(total / samples as f64)
}

pub fn from_counts(c: &TextCounts) -> Readability {
    if c.words == 0 || c.sentences == 0 {
        return Readability::default();
    }
    let w = c.words as f64;
    let s = c.sentences as f64;
    let wps = w / s;
    let pdw = 100.0 * c.dale_unfamiliar as f64 / w;
    let puw = 100.0 * c.spache_unfamiliar as f64 / w;
    let dale = 0.1579 * pdw + 0.0496 * wps + if pdw > 5.0 { 3.6365 } else { 0.0 };
    let letters_per_100 = 100.0 * c.letters as f64 / w;
    let sentences_per_100 = 100.0 * s / w;
    Readability {
        flesch_reading_ease: Some(206.835 - 1.015 * wps - 84.6 * (c.syllables as f64 / w)),
        dale_chall: Some(dale),
        automated_readability_index: Some(4.71 * (c.letters as f64 / w) + 0.5 * wps - 21.43),
        coleman_liau: Some(0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8),
        gunning_fog: Some(0.4 * (wps + 100.0 * c.complex_words as f64 / w)),
        smog: Some(1.0430 * (c.polysyllables as f64 * 30.0 / s).sqrt() + 3.1291),
        spache: Some(0.121 * wps + 0.082 * puw + 0.659),
        linsear_write: c
            .linsear_raw
            .map(|x| if x > 20.0 { x / 2.0 } else { (x - 2.0) / 2.0 }),
    }
}

/// All eight metrics for an annotated book; metrics are absent when the book
/// has no words.
pub fn readability_suite(book: &AnnotatedBook, lex: &Lexicons) -> Readability {
    from_counts(&count(book, lex))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::CharacterConfig;
    use crate::pipeline::annotate_text;

    fn counts(text: &str) -> TextCounts {
        let lex = Lexicons::bundled();
        let book = annotate_text("t", text, lex, &CharacterConfig::default()).unwrap();
        count(&book, lex)
    }

    #[test]
    fn cat_sat_counts() {
        let c = counts("The cat sat on the mat.");
        assert_eq!((c.words, c.sentences, c.syllables, c.letters), (6, 1, 6, 17));
        assert_eq!(c.complex_words, 0);
        assert_eq!(c.dale_unfamiliar, 0);
        // "mat" is not on the Spache list
        assert_eq!(c.spache_unfamiliar, 1);
    }

    #[test]
    fn proper_nouns_are_not_complex() {
        let c = counts("My friend Elizabeth visited the garden.");
        assert_eq!(c.polysyllables, 2);
        assert_eq!(c.complex_words, 1);
    }

    #[test]
    fn inflected_familiar_words() {
        let c = counts("It is raining.");
        assert_eq!(c.dale_unfamiliar, 0);
    }

    #[test]
    fn linsear_averages_samples() {
        // 20 sentences of 11 one-syllable words; the trailing 20 words are
        // left out
        let text = vec!["The dog and the cat ran to the big red box."; 20].join(" ");
        let c = counts(&text);
        assert_eq!(c.words, 220);
        let raw = c.linsear_raw.unwrap();
        // samples: words 0..100 touch sentences 0..=9 (11 words each), and
        // words 100..200 touch sentences 9..=18
        assert!((raw - 10.0).abs() < 1e-12, "{raw}");
    }

    #[test]
    fn empty_book_has_no_metrics() {
        let r = from_counts(&TextCounts::default());
        assert_eq!(r.undefined().len(), 8);
    }
}
