//! Per-book and corpus-level analytics.

pub mod corpus;
pub mod embedding;
pub mod readability;
pub mod vocabulary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::characters::{
    build_interaction_network, build_occurrence_timeline, protagonist_stats, ranked, CharacterConfig,
    InteractionNetwork, ProtagonistStats, Timeline,
};
use crate::error::{Error, Result};
use crate::lexicon::Lexicons;
use crate::xml::{AnnotatedBook, Gender, Pos};

pub use corpus::{RankShare, Top2Distribution, YearBin};
pub use embedding::{DocVectors, EmbeddingConfig, SimilarBook};
pub use readability::Readability;
pub use vocabulary::{LemmaCounts, RepresentativeVocabulary};

/// Version of the book.json and corpus.json layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsConfig {
    /// Corpus words considered for representative vocabulary.
    pub vocabulary_top_common: usize,
    pub vocabulary_list_len: usize,
    pub similar_k: usize,
    pub similar_per_corpus: bool,
    pub top2_outlier_threshold: f64,
    pub embedding: EmbeddingConfig,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            vocabulary_top_common: 10_000,
            vocabulary_list_len: 25,
            similar_k: 10,
            similar_per_corpus: false,
            top2_outlier_threshold: 10.0,
            embedding: EmbeddingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosShare {
    pub pos: Pos,
    pub count: usize,
    pub percent: f64,
}

/// Counts and percentages of the eight analyzed tags, over those tags only.
pub fn pos_distribution(book: &AnnotatedBook) -> Result<Vec<PosShare>> {
    let mut counts = [0usize; 8];
    for token in book.tokens() {
        if let Some(i) = token.pos.and_then(|p| Pos::ANALYZED.iter().position(|&a| a == p)) {
            counts[i] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Insufficient("no tagged tokens".into()));
    }
    Ok(Pos::ANALYZED
        .iter()
        .zip(counts)
        .map(|(&pos, count)| PosShare {
            pos,
            count,
            percent: 100.0 * count as f64 / total as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterSummary {
    pub id: u32,
    pub name: String,
    pub gender: Gender,
    pub mentions: usize,
    pub aliases: BTreeMap<String, usize>,
    pub gcc: usize,
    pub fpcc: usize,
    pub spcc: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenderCounts {
    pub male: usize,
    pub female: usize,
    pub unknown: usize,
}

impl GenderCounts {
    /// Percentage of known-gender characters that are male.
    pub fn male_percent(&self) -> Option<f64> {
        let known = self.male + self.female;
        (known > 0).then(|| 100.0 * self.male as f64 / known as f64)
    }
}

/// Where a book sits among all books of the corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusPlacement {
    pub male_percent_percentile: Option<f64>,
    /// Percentile of the book's share of each analyzed tag.
    pub pos_percentiles: BTreeMap<Pos, f64>,
    /// Mean corpus share of each analyzed tag.
    pub corpus_pos_percent: BTreeMap<Pos, f64>,
}

/// Everything reported about one book. The corpus-dependent parts are filled
/// in once every book has been analyzed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BookAnalytics {
    pub schema_version: u32,
    pub id: String,
    pub corpus: String,
    pub title: Option<String>,
    pub author: Option<String>,
    pub year: Option<i32>,
    pub subjects: Vec<String>,
    pub tokens: usize,
    pub sections: usize,
    pub characters: Vec<CharacterSummary>,
    pub gender_counts: GenderCounts,
    pub protagonist: Option<ProtagonistStats>,
    pub protagonist_gender: Option<Gender>,
    pub readability: Readability,
    pub pos: Vec<PosShare>,
    pub network: Option<InteractionNetwork>,
    pub timeline: Option<Timeline>,
    pub vocabulary: Option<RepresentativeVocabulary>,
    pub similar: Vec<SimilarBook>,
    pub placement: Option<CorpusPlacement>,
    pub warnings: Vec<String>,
}

/// The analytics that need only the book itself.
pub fn analyze_book(book: &AnnotatedBook, lex: &Lexicons, cfg: &CharacterConfig) -> BookAnalytics {
    let mut warnings = Vec::new();
    let characters: Vec<CharacterSummary> = ranked(&book.characters)
        .into_iter()
        .map(|c| CharacterSummary {
            id: c.id,
            name: c.canonical_name.clone(),
            gender: c.gender,
            mentions: c.mention_count(),
            aliases: c.aliases.clone(),
            gcc: c.gcc,
            fpcc: c.fpcc,
            spcc: c.spcc,
        })
        .collect();
    let mut gender_counts = GenderCounts::default();
    for c in &characters {
        match c.gender {
            Gender::Male => gender_counts.male += 1,
            Gender::Female => gender_counts.female += 1,
            Gender::Unknown => gender_counts.unknown += 1,
        }
    }
    let protagonist = protagonist_stats(&book.characters);
    let readability = readability::readability_suite(book, lex);
    let undefined = readability.undefined();
    if !undefined.is_empty() {
        warnings.push(format!("undefined readability metrics: {}", undefined.join(", ")));
    }
    let pos = pos_distribution(book).unwrap_or_else(|e| {
        warnings.push(e.to_string());
        Vec::new()
    });
    BookAnalytics {
        schema_version: SCHEMA_VERSION,
        id: book.meta.source_id.clone(),
        corpus: book.meta.corpus.clone(),
        title: book.meta.title.clone(),
        author: book.meta.author.clone(),
        year: book.meta.year,
        subjects: book.meta.subjects.clone(),
        tokens: book.token_count(),
        sections: book.body.sections.len(),
        protagonist_gender: protagonist
            .as_ref()
            .and_then(|p| book.character(p.protagonist_id))
            .map(|c| c.gender),
        protagonist,
        gender_counts,
        characters,
        readability,
        pos,
        network: Some(build_interaction_network(
            &book.characters,
            cfg.network_window,
            cfg.network_min_co,
            cfg.co_occurrence,
        )),
        timeline: Some(build_occurrence_timeline(book, cfg.timeline_top_k)),
        vocabulary: None,
        similar: Vec::new(),
        placement: None,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosCorrelations {
    pub labels: Vec<Pos>,
    pub matrix: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub title: Option<String>,
    pub author: Option<String>,
    pub year: Option<i32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexPage {
    pub name: String,
    pub books: Vec<String>,
}

/// Corpus-wide results, one entry per analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub schema_version: u32,
    pub books: usize,
    pub rank_share: Option<RankShare>,
    pub top2_ratio: Top2Distribution,
    pub gender_over_time: Option<Vec<YearBin>>,
    pub pos_correlations: Option<PosCorrelations>,
    pub catalog: Vec<CatalogEntry>,
    pub authors: Vec<IndexPage>,
    pub subjects: Vec<IndexPage>,
    pub per_book: BTreeMap<String, BookCorpusView>,
    /// Analyses skipped for lack of data, with the reason.
    pub skipped: BTreeMap<String, String>,
}

/// The corpus-dependent parts of one book's analytics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BookCorpusView {
    pub vocabulary: Option<RepresentativeVocabulary>,
    pub similar: Vec<SimilarBook>,
    pub placement: CorpusPlacement,
}

fn pos_percents(a: &BookAnalytics) -> Option<Vec<f64>> {
    (a.pos.len() == 8).then(|| a.pos.iter().map(|p| p.percent).collect())
}

fn index_pages<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)>) -> Vec<IndexPage> {
    let mut map: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (key, id) in pairs {
        map.entry(key).or_default().push(id.to_string());
    }
    map.into_iter()
        .map(|(name, mut books)| {
            books.sort();
            IndexPage {
                name: name.to_string(),
                books,
            }
        })
        .collect()
}

/// Aggregates per-book analytics into corpus statistics. `lemmas` holds the
/// lemma counts of each book by id; `vectors` the trained book vectors, if
/// any.
pub fn corpus_stats(
    books: &[BookAnalytics],
    lemmas: &BTreeMap<String, LemmaCounts>,
    vectors: Option<&DocVectors>,
    cfg: &AnalyticsConfig,
) -> CorpusStats {
    let mut books: Vec<&BookAnalytics> = books.iter().collect();
    books.sort_by(|a, b| a.id.cmp(&b.id));
    let mut stats = CorpusStats {
        schema_version: SCHEMA_VERSION,
        books: books.len(),
        ..CorpusStats::default()
    };
    let mut skipped = BTreeMap::new();

    let counts: Vec<Vec<usize>> = books
        .iter()
        .map(|b| b.characters.iter().map(|c| c.mentions).collect())
        .collect();
    match corpus::rank_share_curve(&counts, corpus::RANKS) {
        Ok(r) => stats.rank_share = Some(r),
        Err(e) => {
            skipped.insert("rank_share".to_string(), skip_reason("rank_share", e));
        }
    }

    let ratios: Vec<(String, f64)> = books
        .iter()
        .filter_map(|b| Some((b.id.clone(), b.protagonist.as_ref()?.top2_ratio?)))
        .collect();
    stats.top2_ratio = corpus::top2_ratio_distribution(&ratios, cfg.top2_outlier_threshold);

    let dated: Vec<(i32, Gender)> = books
        .iter()
        .filter_map(|b| Some((b.year?, b.protagonist_gender?)))
        .collect();
    match corpus::gender_over_time(&dated) {
        Ok(bins) => stats.gender_over_time = Some(bins),
        Err(e) => {
            skipped.insert("gender_over_time".to_string(), skip_reason("gender_over_time", e));
        }
    }

    let pos_rows: Vec<(&str, Vec<f64>)> = books
        .iter()
        .filter_map(|b| Some((b.id.as_str(), pos_percents(b)?)))
        .collect();
    let rows: Vec<Vec<f64>> = pos_rows.iter().map(|r| r.1.clone()).collect();
    match corpus::pos_correlations(&rows) {
        Ok(matrix) => {
            stats.pos_correlations = Some(PosCorrelations {
                labels: Pos::ANALYZED.to_vec(),
                matrix,
            })
        }
        Err(e) => {
            skipped.insert("pos_correlations".to_string(), skip_reason("pos_correlations", e));
        }
    }

    stats.catalog = books
        .iter()
        .map(|b| CatalogEntry {
            id: b.id.clone(),
            title: b.title.clone(),
            author: b.author.clone(),
            year: b.year,
        })
        .collect();
    stats.authors = index_pages(books.iter().filter_map(|b| Some((b.author.as_deref()?, b.id.as_str()))));
    stats.subjects = index_pages(
        books
            .iter()
            .flat_map(|b| b.subjects.iter().map(move |s| (s.as_str(), b.id.as_str()))),
    );

    let mut corpus_lemmas = LemmaCounts::default();
    for counts in lemmas.values() {
        corpus_lemmas.merge(counts);
    }
    let male: Vec<f64> = books.iter().filter_map(|b| b.gender_counts.male_percent()).collect();
    let corpus_pos: BTreeMap<Pos, f64> = Pos::ANALYZED
        .iter()
        .enumerate()
        .filter(|_| !rows.is_empty())
        .map(|(i, &p)| (p, rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64))
        .collect();
    for b in &books {
        let mut view = BookCorpusView::default();
        if let Some(own) = lemmas.get(&b.id) {
            view.vocabulary = vocabulary::representative_vocabulary(
                own,
                &corpus_lemmas,
                cfg.vocabulary_top_common,
                cfg.vocabulary_list_len,
            )
            .ok();
        }
        if let Some(v) = vectors {
            view.similar = v
                .most_similar(&b.id, cfg.similar_k, cfg.similar_per_corpus)
                .unwrap_or_default();
        }
        view.placement.male_percent_percentile = b
            .gender_counts
            .male_percent()
            .and_then(|m| corpus::percentile(m, &male).ok());
        if let Some(own) = pos_percents(b) {
            for (i, &p) in Pos::ANALYZED.iter().enumerate() {
                let column: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                if let Ok(pct) = corpus::percentile(own[i], &column) {
                    view.placement.pos_percentiles.insert(p, pct);
                }
            }
        }
        view.placement.corpus_pos_percent = corpus_pos.clone();
        stats.per_book.insert(b.id.clone(), view);
    }
    stats.skipped = skipped;
    stats
}

fn skip_reason(name: &str, e: Error) -> String {
    log::info!("corpus statistic {name} skipped: {e}");
    e.to_string()
}

impl BookAnalytics {
    /// Replaces the corpus-dependent parts with those computed for this book;
    /// a book the stats do not cover gets none.
    pub fn with_corpus_view(mut self, stats: &CorpusStats) -> BookAnalytics {
        let view = stats.per_book.get(&self.id);
        self.vocabulary = view.and_then(|v| v.vocabulary.clone());
        self.similar = view.map(|v| v.similar.clone()).unwrap_or_default();
        self.placement = view.map(|v| v.placement.clone());
        self
    }
}
