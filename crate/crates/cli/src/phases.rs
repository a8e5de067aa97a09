//! The subcommands. Per-book work runs on the rayon pool; a failing book is
//! logged, recorded as failed and left out of later steps.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use bookscope::analytics::embedding::{lemma_stream, train_embeddings, DocStream};
use bookscope::analytics::{analyze_book, corpus_stats, BookAnalytics, LemmaCounts};
use bookscope::config::Config;
use bookscope::dedup::{dedup_corpus, fingerprint, CorpusIndex, IndexEntry};
use bookscope::ingest::{fetch_gutenberg, read_gutenberg, read_hathi_pagewise, RawBook};
use bookscope::pipeline;
use bookscope::report::{self, write_if_changed, write_json};
use bookscope::xml::{self, AnnotatedBook, Meta, Phase};
use bookscope::{Error, Lexicons, Result};
use rayon::prelude::*;

use crate::progress::{ProgressLog, Record, Status};
use crate::store::{self, digest, Store};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Context {
    pub cfg: Config,
    pub store: Store,
    pub input: Option<PathBuf>,
    pub force: bool,
    pub lex: &'static Lexicons,
    pub lex_fingerprint: String,
    pub progress: ProgressLog,
}

/// Books that failed in one phase.
pub type Failures = usize;

impl Context {
    pub fn new(cfg: Config, input: Option<PathBuf>, out: &Path, log: Option<&Path>, force: bool) -> Result<Context> {
        let lex: &'static Lexicons = match &cfg.lexicon_dir {
            Some(dir) => Box::leak(Box::new(Lexicons::with_overrides(dir)?)),
            None => Lexicons::bundled(),
        };
        let lex_fingerprint = store::lexicon_fingerprint(cfg.lexicon_dir.as_deref())?;
        let store = Store::new(out);
        let progress = ProgressLog::new(log.unwrap_or(&store.progress_log()));
        Ok(Context {
            cfg,
            store,
            input,
            force,
            lex,
            lex_fingerprint,
            progress,
        })
    }

    fn input_dir(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("this command needs --in".into()))
    }

    /// Runs `work` on every item in parallel, recording progress. `work`
    /// returns whether it did anything, plus an optional note.
    fn each<T, F>(&self, phase: &str, items: &[T], name: impl Fn(&T) -> String + Sync, work: F) -> Failures
    where
        T: Sync,
        F: Fn(&T) -> Result<(bool, Option<String>)> + Sync,
    {
        items
            .par_iter()
            .map(|item| {
                let book = name(item);
                let start = Instant::now();
                let (status, message) = match work(item) {
                    Ok((true, note)) => (Status::Done, note),
                    Ok((false, note)) => (Status::Skipped, note),
                    Err(e) => {
                        log::error!("{phase} {book}: {e}");
                        (Status::Failed, Some(e.to_string()))
                    }
                };
                log::info!("{phase} {book}: {status:?}");
                self.progress.record(&Record {
                    phase,
                    book: &book,
                    status,
                    elapsed_ms: start.elapsed().as_millis() as u64,
                    message,
                });
                usize::from(status == Status::Failed)
            })
            .sum()
    }

    fn read_meta(&self, id: &str) -> Result<(String, Meta)> {
        let path = self.store.book_xml(id);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta = xml::parse_meta(&text)?;
        Ok((text, meta))
    }

    fn write_book(&self, book: &AnnotatedBook) -> Result<bool> {
        let text = xml::serialize(book)?;
        write_if_changed(&self.store.book_xml(&book.meta.source_id), text.as_bytes())
    }
}

fn require<'a>(meta: &'a Meta, id: &str, phase: Phase) -> Result<&'a str> {
    meta.stamp(phase)
        .map(|s| s.digest.as_str())
        .ok_or_else(|| Error::MissingPhase {
            book: id.to_string(),
            missing: phase.as_str().to_string(),
        })
}

fn is_current(meta: &Meta, phase: Phase, expected: &str) -> bool {
    meta.stamp(phase).is_some_and(|s| s.digest == expected)
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_default()
}

pub fn fetch(ctx: &Context, ids: &[u64]) -> Result<Failures> {
    let dest = ctx.input_dir()?;
    Ok(ctx.each("fetch", ids, |id| format!("pg{id}"), |&id| {
        let existed = dest.join(format!("pg{id}.txt")).is_file();
        fetch_gutenberg(id, &ctx.cfg.mirror_url, dest)?;
        Ok((!existed, None))
    }))
}

/// Raw inputs under `dir`: `*.txt` files and directories of page files.
pub fn discover_inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if name.starts_with('.') || name.starts_with('_') {
            continue;
        }
        if path.is_dir() || path.extension().is_some_and(|e| e == "txt") {
            found.push(path);
        }
    }
    found.sort();
    Ok(found)
}

fn read_raw(path: &Path) -> Result<RawBook> {
    if path.is_dir() {
        read_hathi_pagewise(path)
    } else {
        read_gutenberg(path)
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with(['_', '.'])
        && id.chars().all(|c| c.is_alphanumeric() || "-_.".contains(c))
}

fn ingest_digest(ctx: &Context, raw: &RawBook) -> String {
    let mut parts = vec![
        "ingest".to_string(),
        VERSION.to_string(),
        ctx.cfg.corpus.clone(),
        json(&ctx.cfg.matter),
        raw.source_id.clone(),
        format!("{:?}", raw.source_kind),
        json(&raw.metadata),
    ];
    parts.extend(raw.pages.iter().cloned());
    digest(parts)
}

pub fn ingest(ctx: &Context) -> Result<Failures> {
    let inputs = discover_inputs(ctx.input_dir()?)?;
    let claimed: Mutex<HashMap<String, PathBuf>> = Mutex::new(HashMap::new());
    Ok(ctx.each(
        "ingest",
        &inputs,
        |p| p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        |path| {
            let raw = read_raw(path)?;
            let id = raw.source_id.clone();
            if !valid_id(&id) {
                return Err(Error::Config(format!("{}: unusable book id {id:?}", path.display())));
            }
            if let Some(other) = claimed.lock().unwrap().insert(id.clone(), path.clone()) {
                return Err(Error::Config(format!(
                    "book id {id} comes from both {} and {}",
                    other.display(),
                    path.display()
                )));
            }
            let stamp = ingest_digest(ctx, &raw);
            if !ctx.force {
                if let Ok((_, meta)) = ctx.read_meta(&id) {
                    if is_current(&meta, Phase::Ingest, &stamp) {
                        return Ok((false, Some(id)));
                    }
                }
            }
            let (mut book, warnings) = pipeline::ingest_book(&raw, &ctx.cfg.corpus, &ctx.cfg.matter);
            for w in &warnings {
                log::warn!("{id}: {w}");
            }
            book.meta.set_stamp(Phase::Ingest, stamp);
            ctx.write_book(&book)?;
            Ok((true, Some(id)))
        },
    ))
}

pub fn dedup(ctx: &Context) -> Result<Failures> {
    let cfg = ctx.cfg.dedup_config();
    let ids = ctx.store.book_ids()?;
    let metas: Vec<(String, Result<String>)> = ids
        .par_iter()
        .map(|id| {
            let stamp = ctx
                .read_meta(id)
                .and_then(|(_, m)| require(&m, id, Phase::Ingest).map(str::to_string));
            (id.clone(), stamp)
        })
        .collect();
    let mut parts = vec!["dedup".to_string(), VERSION.to_string(), json(&cfg)];
    for (id, stamp) in &metas {
        parts.push(id.clone());
        parts.push(stamp.as_ref().map(String::as_str).unwrap_or("-").to_string());
    }
    let corpus_digest = digest(parts);
    let index_path = ctx.store.corpus_file(store::INDEX_FILE);
    if !ctx.force
        && index_path.is_file()
        && ctx.store.read_stamp(store::DEDUP_STAMP).as_deref() == Some(&corpus_digest)
    {
        log::info!("dedup: corpus unchanged");
        return Ok(metas.iter().filter(|m| m.1.is_err()).count());
    }

    let entries: Mutex<Vec<IndexEntry>> = Mutex::new(Vec::new());
    let failed = ctx.each("dedup", &metas, |m| m.0.clone(), |(id, stamp)| {
        if let Err(e) = stamp {
            return Err(clone_error(e));
        }
        let (text, _) = ctx.read_meta(id)?;
        let book = xml::parse(&text)?;
        let body = book.reconstruct_body_text();
        let title = book.meta.title.clone().unwrap_or_default();
        let author = book.meta.author.clone().unwrap_or_default();
        let fp = match fingerprint(&body, &title, &author, &cfg) {
            Ok(fp) => Some(fp),
            Err(e @ Error::TooShort { .. }) => {
                log::warn!("{id}: no content fingerprint: {e}");
                None
            }
            Err(e) => return Err(e),
        };
        entries.lock().unwrap().push(IndexEntry {
            id: id.clone(),
            title: book.meta.title.clone(),
            author: book.meta.author.clone(),
            year: book.meta.year,
            words: body.split_whitespace().count(),
            fingerprint: fp,
            representative_of: None,
        });
        Ok((true, None))
    });
    let mut entries = entries.into_inner().unwrap();
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let index = dedup_corpus(
        &CorpusIndex { entries },
        cfg.title_author_match,
        cfg.content_threshold,
    )?;
    for e in &index.entries {
        if let Some(kept) = &e.representative_of {
            log::info!("dedup: {} duplicates {kept}", e.id);
        }
    }
    let mut bytes = Vec::new();
    for e in &index.entries {
        bytes.extend(serde_json::to_vec(e)?);
        bytes.push(b'\n');
    }
    write_if_changed(&index_path, &bytes)?;
    if failed == 0 {
        write_if_changed(&ctx.store.corpus_file(store::DEDUP_STAMP), corpus_digest.as_bytes())?;
    } else {
        // a missing stamp forces a full rerun next time
        let _ = std::fs::remove_file(ctx.store.corpus_file(store::DEDUP_STAMP));
    }
    Ok(failed)
}

struct AnnotateStamps {
    segment: String,
    linguistic: String,
    characters: String,
}

fn annotate_stamps(ctx: &Context, ingest: &str) -> AnnotateStamps {
    let segment = digest(["segment", VERSION, ingest, &ctx.lex_fingerprint]);
    let linguistic = digest(["linguistic", VERSION, &segment, &ctx.lex_fingerprint]);
    let characters = digest(["characters", VERSION, &linguistic, &json(&ctx.cfg.characters)]);
    AnnotateStamps {
        segment,
        linguistic,
        characters,
    }
}

/// Puts a book back into its just-ingested state.
fn unsegment(book: &mut AnnotatedBook) {
    if book.body.text.is_none() {
        book.body.text = Some(book.reconstruct_body_text());
        book.body.lead.clear();
        book.body.sections.clear();
    }
    book.characters.clear();
}

pub fn annotate(ctx: &Context) -> Result<Failures> {
    let ids = ctx.store.kept_ids()?;
    Ok(ctx.each("annotate", &ids, String::clone, |id| {
        let (text, meta) = ctx.read_meta(id)?;
        let stamps = annotate_stamps(ctx, require(&meta, id, Phase::Ingest)?);
        if !ctx.force && is_current(&meta, Phase::Characters, &stamps.characters) {
            return Ok((false, None));
        }
        let mut book = xml::parse(&text)?;
        unsegment(&mut book);
        let mut warnings = pipeline::segment(&mut book, ctx.lex)?;
        book.meta.set_stamp(Phase::Segment, stamps.segment);
        warnings.extend(pipeline::annotate_linguistic(&mut book, ctx.lex));
        book.meta.set_stamp(Phase::Linguistic, stamps.linguistic);
        pipeline::annotate_characters(&mut book, ctx.lex, &ctx.cfg.characters);
        book.meta.set_stamp(Phase::Characters, stamps.characters);
        for w in &warnings {
            log::debug!("{id}: {w}");
        }
        if !warnings.is_empty() {
            log::info!("{id}: {} annotation warnings (-vv lists them)", warnings.len());
        }
        ctx.write_book(&book)?;
        Ok((true, Some(format!("{} tokens, {} characters", book.token_count(), book.characters.len()))))
    }))
}

pub fn analyze(ctx: &Context) -> Result<Failures> {
    let ids = ctx.store.kept_ids()?;
    Ok(ctx.each("analyze", &ids, String::clone, |id| {
        let (text, meta) = ctx.read_meta(id)?;
        let stamp = digest(["analytics", VERSION, require(&meta, id, Phase::Characters)?]);
        let json_path = ctx.store.book_dir(id).join(report::BOOK_JSON);
        if !ctx.force && is_current(&meta, Phase::Analytics, &stamp) && json_path.is_file() {
            return Ok((false, None));
        }
        let mut book = xml::parse(&text)?;
        let analytics = analyze_book(&book, ctx.lex, &ctx.cfg.characters);
        write_json(&json_path, &analytics)?;
        book.meta.set_stamp(Phase::Analytics, stamp);
        ctx.write_book(&book)?;
        Ok((true, None))
    }))
}

struct CorpusInput {
    analytics: BookAnalytics,
    lemmas: LemmaCounts,
    stream: DocStream,
}

pub fn corpus(ctx: &Context) -> Result<Failures> {
    let cfg = ctx.cfg.analytics_config();
    let ids = ctx.store.kept_ids()?;
    let stamps: Vec<(String, Result<String>)> = ids
        .par_iter()
        .map(|id| {
            let s = ctx
                .read_meta(id)
                .and_then(|(_, m)| require(&m, id, Phase::Analytics).map(str::to_string));
            (id.clone(), s)
        })
        .collect();
    let mut parts = vec!["corpus".to_string(), VERSION.to_string(), json(&cfg), ctx.lex_fingerprint.clone()];
    for (id, s) in &stamps {
        parts.push(id.clone());
        parts.push(s.as_ref().map(String::as_str).unwrap_or("-").to_string());
    }
    let corpus_digest = digest(parts);
    if !ctx.force
        && ctx.store.corpus_file(report::CORPUS_JSON).is_file()
        && ctx.store.read_stamp(store::CORPUS_STAMP).as_deref() == Some(&corpus_digest)
    {
        log::info!("corpus-stats: corpus unchanged");
        return Ok(stamps.iter().filter(|s| s.1.is_err()).count());
    }

    let loaded: Mutex<Vec<CorpusInput>> = Mutex::new(Vec::new());
    let failed = ctx.each("corpus-stats", &stamps, |s| s.0.clone(), |(id, stamp)| {
        if let Err(e) = stamp {
            return Err(clone_error(e));
        }
        let analytics = report::read_book_json(&ctx.store.book_dir(id).join(report::BOOK_JSON))?;
        let (text, _) = ctx.read_meta(id)?;
        let book = xml::parse(&text)?;
        loaded.lock().unwrap().push(CorpusInput {
            lemmas: LemmaCounts::of_book(&book),
            stream: DocStream {
                id: id.clone(),
                corpus: book.meta.corpus.clone(),
                words: lemma_stream(&book, ctx.lex),
            },
            analytics,
        });
        Ok((true, None))
    });
    let mut loaded = loaded.into_inner().unwrap();
    loaded.sort_by(|a, b| a.stream.id.cmp(&b.stream.id));

    let start = Instant::now();
    let docs: Vec<DocStream> = loaded.iter().map(|l| l.stream.clone()).collect();
    let vectors_path = ctx.store.corpus_file(store::VECTORS_FILE);
    let (vectors, embed_error) = match train_embeddings(&docs, &cfg.embedding) {
        Ok(v) => (Some(v), None),
        Err(e) => {
            log::warn!("book embeddings skipped: {e}");
            (None, Some(e.to_string()))
        }
    };
    let books: Vec<BookAnalytics> = loaded.iter().map(|l| l.analytics.clone()).collect();
    let lemmas: BTreeMap<String, LemmaCounts> = loaded
        .into_iter()
        .map(|l| (l.stream.id, l.lemmas))
        .collect();
    let mut stats = corpus_stats(&books, &lemmas, vectors.as_ref(), &cfg);
    if let Some(reason) = embed_error {
        stats.skipped.insert("similar".to_string(), reason);
    }
    std::fs::create_dir_all(ctx.store.corpus_dir()).map_err(|e| Error::io(ctx.store.corpus_dir(), e))?;
    match &vectors {
        Some(v) => {
            let tmp = ctx.store.corpus_file(".vectors.bin.new");
            v.write(&tmp)?;
            let bytes = std::fs::read(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let _ = std::fs::remove_file(&tmp);
            write_if_changed(&vectors_path, &bytes)?;
        }
        None => {
            let _ = std::fs::remove_file(&vectors_path);
        }
    }
    write_json(&ctx.store.corpus_file(report::CORPUS_JSON), &stats)?;
    let stamp_path = ctx.store.corpus_file(store::CORPUS_STAMP);
    if failed == 0 {
        write_if_changed(&stamp_path, corpus_digest.as_bytes())?;
    } else {
        let _ = std::fs::remove_file(&stamp_path);
    }
    ctx.progress.record(&Record {
        phase: "corpus-stats",
        book: store::CORPUS_DIR,
        status: Status::Done,
        elapsed_ms: start.elapsed().as_millis() as u64,
        message: Some(format!("{} books", stats.books)),
    });
    Ok(failed)
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::MissingPhase { book, missing } => Error::MissingPhase {
            book: book.clone(),
            missing: missing.clone(),
        },
        other => Error::Invariant(other.to_string()),
    }
}

pub fn report(ctx: &Context) -> Result<Failures> {
    let corpus_json = ctx.store.corpus_file(report::CORPUS_JSON);
    if !corpus_json.is_file() {
        return Err(Error::MissingPhase {
            book: store::CORPUS_DIR.to_string(),
            missing: "corpus-stats".to_string(),
        });
    }
    let stats = report::read_corpus_json(&corpus_json)?;
    let ids = ctx.store.kept_ids()?;
    let failed = ctx.each("report", &ids, String::clone, |id| {
        let dir = ctx.store.book_dir(id);
        let json_path = dir.join(report::BOOK_JSON);
        if !json_path.is_file() {
            return Err(Error::MissingPhase {
                book: id.clone(),
                missing: Phase::Analytics.as_str().to_string(),
            });
        }
        let analytics = report::read_book_json(&json_path)?.with_corpus_view(&stats);
        let written = report::emit_book_report(&analytics, &dir)?;
        Ok((!written.is_empty(), None))
    });
    report::emit_corpus_report(&stats, &ctx.store.corpus_dir())?;
    Ok(failed)
}

/// Every phase in order. Later phases still run when some books fail, over
/// the books that made it.
pub fn all(ctx: &Context) -> Result<Failures> {
    let mut failed = 0;
    if !ctx.cfg.fetch_ids.is_empty() {
        failed += fetch(ctx, &ctx.cfg.fetch_ids)?;
    }
    failed += ingest(ctx)?;
    failed += dedup(ctx)?;
    failed += annotate(ctx)?;
    failed += analyze(ctx)?;
    failed += corpus(ctx)?;
    failed += report(ctx)?;
    Ok(failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_skip_hidden_and_side_files() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["b.txt", "a.txt", ".pg1.txt.part", "vol.manifest", "notes.md"] {
            std::fs::write(dir.path().join(f), "x").unwrap();
        }
        std::fs::create_dir(dir.path().join("vol")).unwrap();
        let names: Vec<String> = discover_inputs(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a.txt", "b.txt", "vol"]);
    }

    #[test]
    fn book_ids_must_be_path_safe() {
        assert!(valid_id("pg730"));
        assert!(valid_id("moby_dick"));
        assert!(!valid_id("_corpus"));
        assert!(!valid_id("../x"));
        assert!(!valid_id(""));
    }
}
