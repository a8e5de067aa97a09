//! Static JSON, HTML and SVG output for books and the corpus.
//!
//! Every file is a deterministic function of its inputs and is only written
//! when its content changes, so regenerating an unchanged report touches
//! nothing on disk.

pub mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quick_xml::escape::escape;

use crate::analytics::{BookAnalytics, CorpusStats, IndexPage};
use crate::error::{Error, Result};
use crate::xml::Pos;
use svg::{render_svg_chart, BarSeries, Chart, GraphNode, LineSeries};

pub const BOOK_JSON: &str = "book.json";
pub const BOOK_HTML: &str = "index.html";
pub const CORPUS_JSON: &str = "corpus.json";
pub const CORPUS_HTML: &str = "corpus.html";

const STYLE: &str = "body{font-family:sans-serif;max-width:960px;margin:2em auto;color:#222}\
table{border-collapse:collapse;margin:1em 0}td,th{border:1px solid #ccc;padding:2px 8px;text-align:left}\
th{background:#f2f2f2}h2{margin-top:2em;border-bottom:1px solid #ddd}.muted{color:#777}";

/// Writes `bytes` to `path` unless the file already holds exactly them.
/// Returns whether the file was written.
pub fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool> {
    if std::fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(false);
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(true)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Pretty JSON in the same layout the reports use, written only if changed.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<bool> {
    write_if_changed(path, &to_json(value)?)
}

pub fn read_book_json(path: &Path) -> Result<BookAnalytics> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn read_corpus_json(path: &Path) -> Result<CorpusStats> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn esc(s: &str) -> String {
    escape(s).into_owned()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into())
}

/// File-name-safe form of an author or subject name.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches('-').to_string();
    if out.is_empty() {
        "unnamed".into()
    } else {
        out
    }
}

/// Slugs for a list of names, numbered when two names collide.
fn slugs(pages: &[IndexPage]) -> Vec<String> {
    let mut seen = std::collections::HashMap::<String, usize>::new();
    pages
        .iter()
        .map(|p| {
            let base = slug(&p.name);
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}-{n}")
            }
        })
        .collect()
}

fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n{body}</body>\n</html>\n",
        esc(title)
    )
}

fn book_title(a: &BookAnalytics) -> String {
    a.title.clone().unwrap_or_else(|| a.id.clone())
}

fn book_html(a: &BookAnalytics) -> Result<String> {
    let mut b = String::new();
    writeln!(b, "<h1>{}</h1>", esc(&book_title(a))).unwrap();
    let mut byline = Vec::new();
    if let Some(author) = &a.author {
        byline.push(esc(author));
    }
    if let Some(year) = a.year {
        byline.push(year.to_string());
    }
    byline.push(format!("{} tokens, {} sections", a.tokens, a.sections));
    writeln!(b, "<p class=\"muted\">{} &middot; {}</p>", byline.join(" &middot; "), esc(&a.id)).unwrap();

    b.push_str("<h2>Characters</h2>\n");
    if a.characters.is_empty() {
        b.push_str("<p class=\"muted\">No characters found.</p>\n");
    } else {
        b.push_str("<table>\n<tr><th>#</th><th>Name</th><th>Gender</th><th>Mentions</th><th>Aliases</th><th>gcc</th><th>fpcc</th><th>spcc</th></tr>\n");
        for c in &a.characters {
            let aliases: Vec<String> = c.aliases.iter().map(|(s, n)| format!("{} ({n})", esc(s))).collect();
            writeln!(
                b,
                "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
                c.id,
                esc(&c.name),
                c.gender.as_str(),
                c.mentions,
                aliases.join(", "),
                c.gcc,
                c.fpcc,
                c.spcc
            )
            .unwrap();
        }
        b.push_str("</table>\n");
    }
    if let Some(p) = &a.protagonist {
        writeln!(
            b,
            "<p>Protagonist: {} ({} mentions); top-2 ratio {}.</p>",
            esc(&p.protagonist),
            p.mentions,
            opt(p.top2_ratio)
        )
        .unwrap();
    }

    b.push_str("<h2>Occurrences</h2>\n");
    let timeline = a.timeline.clone().unwrap_or_default();
    b.push_str(&render_svg_chart(&Chart::Timeline {
        rows: timeline.series.iter().map(|s| (s.name.clone(), s.positions.clone())).collect(),
        breaks: timeline.chapter_breaks.clone(),
    })?);

    b.push_str("<h2>Interactions</h2>\n");
    let network = a.network.clone().unwrap_or_default();
    b.push_str(&render_svg_chart(&Chart::Network {
        nodes: network
            .nodes
            .iter()
            .map(|n| GraphNode {
                id: n.id,
                label: n.name.clone(),
                size: n.size as f64,
                gender: n.gender,
            })
            .collect(),
        edges: network
            .edges
            .iter()
            .map(|e| (e.source, e.target, e.weight as f64))
            .collect(),
    })?);
    writeln!(b, "<p class=\"muted\">{} edges.</p>", network.edges.len()).unwrap();

    b.push_str("<h2>Gender</h2>\n");
    let g = &a.gender_counts;
    writeln!(
        b,
        "<p>{} male, {} female, {} unknown characters; {}% of known-gender characters are male.</p>",
        g.male,
        g.female,
        g.unknown,
        opt(g.male_percent())
    )
    .unwrap();
    if let Some(pct) = a.placement.as_ref().and_then(|p| p.male_percent_percentile) {
        writeln!(b, "<p>That share sits at percentile {pct:.1} of the corpus.</p>").unwrap();
    }

    b.push_str("<h2>Similar books</h2>\n");
    if a.similar.is_empty() {
        b.push_str("<p class=\"muted\">None computed.</p>\n");
    } else {
        b.push_str("<ol>\n");
        for s in &a.similar {
            writeln!(
                b,
                "<li><a href=\"../{0}/index.html\">{0}</a> <span class=\"muted\">{1} &middot; {2:.3}</span></li>",
                esc(&s.id),
                esc(&s.corpus),
                s.similarity
            )
            .unwrap();
        }
        b.push_str("</ol>\n");
    }

    b.push_str("<h2>Representative vocabulary</h2>\n");
    match &a.vocabulary {
        None => b.push_str("<p class=\"muted\">None computed.</p>\n"),
        Some(v) => {
            let list = |words: Vec<String>| if words.is_empty() { "none".to_string() } else { words.join(", ") };
            let scored = |ws: &[crate::analytics::vocabulary::ScoredWord]| {
                list(ws.iter().map(|w| format!("{} ({:.2})", esc(&w.word), w.score)).collect())
            };
            writeln!(b, "<p><b>Most:</b> {}</p>", scored(&v.most)).unwrap();
            writeln!(b, "<p><b>Least:</b> {}</p>", scored(&v.least)).unwrap();
            writeln!(b, "<p><b>Missing:</b> {}</p>", list(v.missing.iter().map(|w| esc(w)).collect())).unwrap();
        }
    }

    b.push_str("<h2>Parts of speech</h2>\n");
    let mut series = vec![BarSeries {
        name: "this book".into(),
        values: a.pos.iter().map(|p| p.percent).collect(),
    }];
    if let Some(p) = &a.placement {
        if !p.corpus_pos_percent.is_empty() {
            series.push(BarSeries {
                name: "corpus mean".into(),
                values: Pos::ANALYZED
                    .iter()
                    .map(|t| p.corpus_pos_percent.get(t).copied().unwrap_or(0.0))
                    .collect(),
            });
        }
    }
    b.push_str(&render_svg_chart(&Chart::Bar {
        categories: Pos::ANALYZED.iter().map(|p| p.as_str().to_string()).collect(),
        series,
        y_label: "% of tagged words".into(),
    })?);
    if !a.pos.is_empty() {
        b.push_str("<table>\n<tr><th>Tag</th><th>Count</th><th>%</th><th>Percentile</th></tr>\n");
        for p in &a.pos {
            let pct = a.placement.as_ref().and_then(|pl| pl.pos_percentiles.get(&p.pos).copied());
            writeln!(
                b,
                "<tr><td>{}</td><td>{}</td><td>{:.2}</td><td>{}</td></tr>",
                p.pos,
                p.count,
                p.percent,
                opt(pct)
            )
            .unwrap();
        }
        b.push_str("</table>\n");
    }

    b.push_str("<h2>Readability</h2>\n<table>\n<tr><th>Metric</th><th>Score</th></tr>\n");
    for (name, value) in crate::analytics::Readability::NAMES.iter().zip(a.readability.values()) {
        writeln!(b, "<tr><td>{}</td><td>{}</td></tr>", name.replace('_', " "), opt(value)).unwrap();
    }
    b.push_str("</table>\n");

    if !a.warnings.is_empty() {
        b.push_str("<h2>Warnings</h2>\n<ul>\n");
        for w in &a.warnings {
            writeln!(b, "<li>{}</li>", esc(w)).unwrap();
        }
        b.push_str("</ul>\n");
    }
    Ok(page(&book_title(a), &b))
}

/// Writes `book.json` and `index.html` for one book into `out_dir`. Returns
/// the files that changed.
pub fn emit_book_report(analytics: &BookAnalytics, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let html = book_html(analytics)?;
    let mut changed = Vec::new();
    for (name, bytes) in [(BOOK_JSON, to_json(analytics)?), (BOOK_HTML, html.into_bytes())] {
        let path = out_dir.join(name);
        if write_if_changed(&path, &bytes)? {
            changed.push(path);
        }
    }
    Ok(changed)
}

fn book_links(stats: &CorpusStats, ids: &[String], prefix: &str) -> String {
    let mut b = String::from("<ul>\n");
    for id in ids {
        let entry = stats.catalog.iter().find(|c| &c.id == id);
        let title = entry.and_then(|c| c.title.clone()).unwrap_or_else(|| id.clone());
        let year = entry.and_then(|c| c.year).map(|y| format!(" ({y})")).unwrap_or_default();
        writeln!(b, "<li><a href=\"{prefix}{}/index.html\">{}</a>{year}</li>", esc(id), esc(&title)).unwrap();
    }
    b.push_str("</ul>\n");
    b
}

fn corpus_html(stats: &CorpusStats, author_slugs: &[String], subject_slugs: &[String]) -> Result<String> {
    let mut b = String::new();
    writeln!(b, "<h1>Corpus</h1>\n<p class=\"muted\">{} books</p>", stats.books).unwrap();

    b.push_str("<h2>Character rank shares</h2>\n");
    let series = match &stats.rank_share {
        Some(r) => {
            let pts = |v: &[f64]| v.iter().enumerate().map(|(i, &s)| ((i + 1) as f64, s)).collect();
            writeln!(b, "<p class=\"muted\">Mean over {} books with at least 9 characters.</p>", r.books).unwrap();
            vec![
                LineSeries {
                    name: "observed".into(),
                    points: pts(&r.observed),
                    dashed: false,
                },
                LineSeries {
                    name: "Benford".into(),
                    points: pts(&r.benford),
                    dashed: true,
                },
                LineSeries {
                    name: "Zipf".into(),
                    points: pts(&r.zipf),
                    dashed: true,
                },
            ]
        }
        None => Vec::new(),
    };
    b.push_str(&render_svg_chart(&Chart::Line {
        series,
        x_label: "character rank".into(),
        y_label: "share of top-9 mentions".into(),
    })?);

    b.push_str("<h2>Protagonist gender over time</h2>\n");
    let bins = stats.gender_over_time.clone().unwrap_or_default();
    let points: Vec<(f64, f64)> = bins
        .iter()
        .enumerate()
        .filter_map(|(i, bin)| Some(((i + 1) as f64, bin.male_percent?)))
        .collect();
    b.push_str(&render_svg_chart(&Chart::Line {
        series: if points.is_empty() {
            Vec::new()
        } else {
            vec![LineSeries {
                name: "% male protagonists".into(),
                points,
                dashed: false,
            }]
        },
        x_label: "year decile".into(),
        y_label: "% male".into(),
    })?);
    if !bins.is_empty() {
        b.push_str("<table>\n<tr><th>Decile</th><th>Years</th><th>Books</th><th>% male</th></tr>\n");
        for (i, bin) in bins.iter().enumerate() {
            let years = match (bin.first_year, bin.last_year) {
                (Some(a), Some(z)) => format!("{a}&ndash;{z}"),
                _ => "&ndash;".into(),
            };
            writeln!(b, "<tr><td>{}</td><td>{years}</td><td>{}</td><td>{}</td></tr>", i + 1, bin.books, opt(bin.male_percent)).unwrap();
        }
        b.push_str("</table>\n");
    }

    b.push_str("<h2>Part-of-speech correlations</h2>\n");
    let (labels, cells) = match &stats.pos_correlations {
        Some(c) => (c.labels.iter().map(|p| p.as_str().to_string()).collect(), c.matrix.clone()),
        None => (Vec::new(), Vec::new()),
    };
    b.push_str(&render_svg_chart(&Chart::Heatmap { labels, cells })?);

    b.push_str("<h2>Top-2 character ratio</h2>\n");
    let t = &stats.top2_ratio;
    b.push_str(&render_svg_chart(&Chart::Bar {
        categories: t.bins.iter().map(|bin| format!("{:.1}", bin.lower)).collect(),
        series: vec![BarSeries {
            name: "books".into(),
            values: t.bins.iter().map(|bin| bin.count as f64).collect(),
        }],
        y_label: "books".into(),
    })?);
    writeln!(b, "<p>Books whose protagonist has more than {} times the mentions of the runner-up:</p>", t.threshold).unwrap();
    b.push_str("<table>\n<tr><th>Book</th><th>Ratio</th></tr>\n");
    for o in &t.outliers {
        writeln!(b, "<tr><td><a href=\"../{0}/index.html\">{0}</a></td><td>{1:.2}</td></tr>", esc(&o.id), o.ratio).unwrap();
    }
    b.push_str("</table>\n");

    if !stats.skipped.is_empty() {
        b.push_str("<h2>Skipped</h2>\n<ul>\n");
        for (name, why) in &stats.skipped {
            writeln!(b, "<li>{}: {}</li>", esc(name), esc(why)).unwrap();
        }
        b.push_str("</ul>\n");
    }

    b.push_str("<h2>Books</h2>\n");
    let ids: Vec<String> = stats.catalog.iter().map(|c| c.id.clone()).collect();
    b.push_str(&book_links(stats, &ids, "../"));
    for (heading, dir, pages, slugs) in [
        ("Authors", "authors", &stats.authors, author_slugs),
        ("Subjects", "subjects", &stats.subjects, subject_slugs),
    ] {
        writeln!(b, "<h2>{heading}</h2>\n<ul>").unwrap();
        for (p, s) in pages.iter().zip(slugs) {
            writeln!(b, "<li><a href=\"{dir}/{s}.html\">{}</a> ({})</li>", esc(&p.name), p.books.len()).unwrap();
        }
        b.push_str("</ul>\n");
    }
    Ok(page("Corpus", &b))
}

/// Writes `corpus.json`, `corpus.html` and the author and subject index
/// pages into `out_dir`. Returns the files that changed.
pub fn emit_corpus_report(stats: &CorpusStats, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let author_slugs = slugs(&stats.authors);
    let subject_slugs = slugs(&stats.subjects);
    let mut files = vec![
        (out_dir.join(CORPUS_JSON), to_json(stats)?),
        (
            out_dir.join(CORPUS_HTML),
            corpus_html(stats, &author_slugs, &subject_slugs)?.into_bytes(),
        ),
    ];
    for (dir, pages, slugs) in [
        ("authors", &stats.authors, &author_slugs),
        ("subjects", &stats.subjects, &subject_slugs),
    ] {
        for (p, s) in pages.iter().zip(slugs) {
            let body = format!(
                "<h1>{}</h1>\n<p><a href=\"../corpus.html\">Corpus</a></p>\n{}",
                esc(&p.name),
                book_links(stats, &p.books, "../../")
            );
            files.push((out_dir.join(dir).join(format!("{s}.html")), page(&p.name, &body).into_bytes()));
        }
    }
    let mut changed = Vec::new();
    for (path, bytes) in files {
        if write_if_changed(&path, &bytes)? {
            changed.push(path);
        }
    }
    Ok(changed)
}
