//! Corpus-level aggregates over per-book summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xml::Gender;

/// Characters a book needs to enter the rank-share curve.
pub const RANKS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankShare {
    /// Mean share of all top-`ranks` mentions held by each rank.
    pub observed: Vec<f64>,
    pub benford: Vec<f64>,
    pub zipf: Vec<f64>,
    pub books: usize,
}

/// Shares of the top `ranks` characters of one book, or `None` when the book
/// has fewer than `ranks` characters with mentions.
pub fn book_rank_shares(mention_counts: &[usize], ranks: usize) -> Option<Vec<f64>> {
    let mut counts: Vec<usize> = mention_counts.iter().copied().filter(|&c| c > 0).collect();
    if counts.len() < ranks || ranks == 0 {
        return None;
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts.truncate(ranks);
    let total: usize = counts.iter().sum();
    Some(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Mean per-rank share over qualifying books, with the reference curves.
pub fn rank_share_curve(books: &[Vec<usize>], ranks: usize) -> Result<RankShare> {
    let shares: Vec<Vec<f64>> = books.iter().filter_map(|b| book_rank_shares(b, ranks)).collect();
    if shares.is_empty() {
        return Err(Error::Insufficient(format!("no book has {ranks} characters")));
    }
    let observed = (0..ranks)
        .map(|r| shares.iter().map(|s| s[r]).sum::<f64>() / shares.len() as f64)
        .collect();
    let (benford, zipf) = reference_distributions(ranks);
    Ok(RankShare {
        observed,
        benford,
        zipf,
        books: shares.len(),
    })
}

/// Benford digit shares and Zipf rank shares over `ranks` positions.
pub fn reference_distributions(ranks: usize) -> (Vec<f64>, Vec<f64>) {
    let benford = (1..=ranks).map(|d| (1.0 + 1.0 / d as f64).log10()).collect();
    let harmonic: f64 = (1..=ranks).map(|r| 1.0 / r as f64).sum();
    let zipf = (1..=ranks).map(|r| 1.0 / r as f64 / harmonic).collect();
    (benford, zipf)
}

/// Decade fraction covered by one top-2 ratio histogram bin.
pub const RATIO_BIN_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioOutlier {
    pub id: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Top2Distribution {
    pub bins: Vec<RatioBin>,
    pub threshold: f64,
    pub outliers: Vec<RatioOutlier>,
}

fn ratio_bin(ratio: f64) -> i64 {
    (ratio.log10() / RATIO_BIN_WIDTH).floor() as i64
}

/// Log-spaced histogram of top-2 ratios, plus the books above `threshold`
/// from the largest ratio down.
pub fn top2_ratio_distribution(ratios: &[(String, f64)], threshold: f64) -> Top2Distribution {
    let valid: Vec<&(String, f64)> = ratios.iter().filter(|(_, r)| r.is_finite() && *r > 0.0).collect();
    let mut bins = Vec::new();
    if let (Some(lo), Some(hi)) = (
        valid.iter().map(|(_, r)| ratio_bin(*r)).min(),
        valid.iter().map(|(_, r)| ratio_bin(*r)).max(),
    ) {
        for b in lo..=hi {
            bins.push(RatioBin {
                lower: 10f64.powf(b as f64 * RATIO_BIN_WIDTH),
                upper: 10f64.powf((b + 1) as f64 * RATIO_BIN_WIDTH),
                count: valid.iter().filter(|(_, r)| ratio_bin(*r) == b).count(),
            });
        }
    }
    let mut outliers: Vec<RatioOutlier> = valid
        .iter()
        .filter(|(_, r)| *r > threshold)
        .map(|(id, ratio)| RatioOutlier {
            id: id.clone(),
            ratio: *ratio,
        })
        .collect();
    outliers.sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then(a.id.cmp(&b.id)));
    Top2Distribution {
        bins,
        threshold,
        outliers,
    }
}

pub const YEAR_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearBin {
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub books: usize,
    /// Percentage of known-gender protagonists that are male.
    pub male_percent: Option<f64>,
}

/// Splits the books into ten equal-count groups by year, keeping books of one
/// year together in the earlier group.
pub fn gender_over_time(books: &[(i32, Gender)]) -> Result<Vec<YearBin>> {
    let n = books.len();
    if n < YEAR_BINS {
        return Err(Error::Insufficient(format!("{n} books with a year, need {YEAR_BINS}")));
    }
    let mut sorted = books.to_vec();
    sorted.sort_by_key(|b| b.0);
    let mut bins = Vec::with_capacity(YEAR_BINS);
    let mut start = 0;
    for b in 0..YEAR_BINS {
        let mut end = if b + 1 == YEAR_BINS {
            n
        } else {
            ((b + 1) * n / YEAR_BINS).max(start)
        };
        if end > start {
            while end < n && sorted[end].0 == sorted[end - 1].0 {
                end += 1;
            }
        }
        let members = &sorted[start..end];
        let male = members.iter().filter(|m| m.1 == Gender::Male).count();
        let known = members.iter().filter(|m| m.1 != Gender::Unknown).count();
        bins.push(YearBin {
            first_year: members.first().map(|m| m.0),
            last_year: members.last().map(|m| m.0),
            books: members.len(),
            male_percent: (known > 0).then(|| 100.0 * male as f64 / known as f64),
        });
        start = end;
    }
    Ok(bins)
}

/// Pearson correlation, or `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pairwise correlations between the columns of per-book vectors.
pub fn correlation_matrix(rows: &[Vec<f64>], min_rows: usize) -> Result<Vec<Vec<Option<f64>>>> {
    if rows.len() < min_rows {
        return Err(Error::Insufficient(format!(
            "{} books for correlations, need {min_rows}",
            rows.len()
        )));
    }
    let width = rows[0].len();
    let columns: Vec<Vec<f64>> = (0..width).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    let mut out = vec![vec![None; width]; width];
    for i in 0..width {
        for j in i..width {
            let r = if i == j {
                pearson(&columns[i], &columns[i]).map(|_| 1.0)
            } else {
                pearson(&columns[i], &columns[j])
            };
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

/// Correlations of per-book part-of-speech percentages; needs three books.
pub fn pos_correlations(books: &[Vec<f64>]) -> Result<Vec<Vec<Option<f64>>>> {
    correlation_matrix(books, 3)
}

/// Midpoint percentile of `value` within `population`.
pub fn percentile(value: f64, population: &[f64]) -> Result<f64> {
    if population.is_empty() {
        return Err(Error::Insufficient("empty population".into()));
    }
    let below = population.iter().filter(|&&p| p < value).count();
    let equal = population.iter().filter(|&&p| p == value).count();
    Ok(100.0 * (below as f64 + 0.5 * equal as f64) / population.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nine_to_one() {
        let counts: Vec<usize> = (1..=9).rev().collect();
        let curve = rank_share_curve(&[counts], 9).unwrap();
        assert!((curve.observed[0] - 0.2).abs() < 1e-12);
        assert_eq!(curve.books, 1);
    }

    #[test]
    fn books_with_few_characters_are_left_out() {
        let few = vec![90, 10, 0, 0, 0, 0, 0, 0, 0];
        assert!(book_rank_shares(&few, 9).is_none());
        assert!(rank_share_curve(&[few], 9).is_err());
    }

    #[test]
    fn reference_curves() {
        let (benford, zipf) = reference_distributions(9);
        assert!((benford[0] - std::f64::consts::LOG10_2).abs() < 1e-12);
        assert!((benford.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((zipf[0] - 2520.0 / 7129.0).abs() < 1e-12);
        assert!((zipf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn top2_outliers() {
        let ratios = vec![("a".to_string(), 2.0), ("b".into(), 3.0), ("c".into(), 50.0)];
        let d = top2_ratio_distribution(&ratios, 10.0);
        assert_eq!(d.outliers.len(), 1);
        assert_eq!(d.outliers[0].id, "c");
        assert_eq!(d.bins.iter().map(|b| b.count).sum::<usize>(), 3);

        let same = vec![("a".to_string(), 4.0), ("b".into(), 4.0)];
        let d = top2_ratio_distribution(&same, 10.0);
        assert_eq!(d.bins.len(), 1);
        assert_eq!(d.bins[0].count, 2);
        assert!(d.bins[0].lower <= 4.0 && 4.0 < d.bins[0].upper);
    }

    #[test]
    fn alternating_genders_by_decile() {
        let books: Vec<(i32, Gender)> = (0..10)
            .map(|i| (1800 + i, if i % 2 == 0 { Gender::Male } else { Gender::Female }))
            .collect();
        let bins = gender_over_time(&books).unwrap();
        for (i, b) in bins.iter().enumerate() {
            assert_eq!(b.books, 1);
            assert_eq!(b.male_percent, Some(if i % 2 == 0 { 100.0 } else { 0.0 }));
        }
        assert!(gender_over_time(&books[..9]).is_err());
    }

    #[test]
    fn all_male_and_unknowns() {
        let mut books: Vec<(i32, Gender)> = (0..20).map(|i| (1900 + i, Gender::Male)).collect();
        assert!(gender_over_time(&books).unwrap().iter().all(|b| b.male_percent == Some(100.0)));
        books[0].1 = Gender::Unknown;
        let first = &gender_over_time(&books).unwrap()[0];
        assert_eq!(first.books, 2);
        assert_eq!(first.male_percent, Some(100.0));
    }

    #[test]
    fn same_year_stays_together() {
        let mut books: Vec<(i32, Gender)> = (0..10).map(|i| (1800 + i, Gender::Male)).collect();
        books[1].0 = 1800;
        books[2].0 = 1800;
        let bins = gender_over_time(&books).unwrap();
        assert_eq!(bins[0].books, 3);
        assert_eq!(bins[1].books, 0);
        assert_eq!(bins.iter().map(|b| b.books).sum::<usize>(), 10);
    }

    #[test]
    fn pearson_examples() {
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), None);
        let m = correlation_matrix(
            &[vec![1.0, 5.0, 2.0], vec![2.0, 5.0, 1.0], vec![3.0, 5.0, 7.0]],
            3,
        )
        .unwrap();
        assert_eq!(m[1], vec![None, None, None]);
        assert_eq!(m[0][0], Some(1.0));
        assert!(pos_correlations(&[vec![1.0]]).is_err());
    }

    #[test]
    fn percentile_examples() {
        let pop: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(50.0, &pop).unwrap() - 49.5).abs() < 1e-12);
        assert!((percentile(1.0, &pop).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(percentile(1000.0, &pop).unwrap(), 100.0);
        assert!(percentile(1.0, &[]).is_err());
    }

    proptest! {
        #[test]
        fn rank_shares_sum_to_one_and_fall(books in prop::collection::vec(prop::collection::vec(1usize..500, 9..20), 1..10)) {
            for b in &books {
                let s = book_rank_shares(b, 9).unwrap();
                prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
            }
            let curve = rank_share_curve(&books, 9).unwrap();
            prop_assert!((curve.observed.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(curve.observed.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn correlation_matrix_is_symmetric(rows in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 8), 3..30)) {
            let m = correlation_matrix(&rows, 3).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert_eq!(m[i][j], m[j][i]);
                    if let Some(r) = m[i][j] {
                        prop_assert!((-1.0..=1.0).contains(&r));
                    }
                }
            }
        }

        #[test]
        fn percentile_is_monotone(pop in prop::collection::vec(-1e6f64..1e6, 1..50), a in -1e6f64..1e6, b in -1e6f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(percentile(lo, &pop).unwrap() <= percentile(hi, &pop).unwrap());
        }

        #[test]
        fn top2_outliers_sorted(ratios in prop::collection::vec(1.0f64..100.0, 0..40)) {
            let input: Vec<(String, f64)> = ratios.iter().enumerate().map(|(i, r)| (format!("b{i}"), *r)).collect();
            let d = top2_ratio_distribution(&input, 10.0);
            let mut brute: Vec<f64> = ratios.iter().copied().filter(|r| *r > 10.0).collect();
            brute.sort_by(|a, b| b.total_cmp(a));
            prop_assert_eq!(d.outliers.iter().map(|o| o.ratio).collect::<Vec<_>>(), brute);
            prop_assert_eq!(d.bins.iter().map(|b| b.count).sum::<usize>(), ratios.len());
        }
    }
}
