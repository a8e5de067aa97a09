use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::SystemTime;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/gutenberg")
}

fn bookscope(args: &[&str], dirs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bookscope"));
    for (flag, dir) in dirs {
        cmd.arg(flag).arg(dir);
    }
    cmd.args(args);
    cmd.env_remove("RUST_LOG");
    for (k, _) in std::env::vars() {
        if k.starts_with("BOOKSCOPE_") {
            cmd.env_remove(k);
        }
    }
    cmd.output().expect("bookscope runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Input directory with copies of the named fixtures.
fn input_with(names: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in names {
        std::fs::copy(fixtures().join(name), dir.path().join(name)).unwrap();
    }
    dir
}

fn mtimes(root: &Path) -> BTreeMap<PathBuf, SystemTime> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.clone(), path.metadata().unwrap().modified().unwrap());
            }
        }
    }
    out
}

fn validate(schema: &str, path: &Path) {
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schema").join(schema))
            .unwrap(),
    )
    .unwrap();
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", path.display());
}

const SMALL: [&str; 3] = ["alice29.txt", "asyoulik.txt", "plrabn12.txt"];

#[test]
fn all_over_three_books_builds_the_store() {
    let input = input_with(&SMALL);
    let store = tempfile::tempdir().unwrap();
    let out = bookscope(&["all"], &[("--in", input.path()), ("--out", store.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    for id in ["alice29", "asyoulik", "plrabn12"] {
        let dir = store.path().join(id);
        let xml = std::fs::read_to_string(dir.join("book.xml")).unwrap();
        let book = bookscope::xml::parse(&xml).unwrap();
        assert!(book.has_phase(bookscope::xml::Phase::Analytics));
        assert!(dir.join("index.html").is_file());
        validate("book.schema.json", &dir.join("book.json"));
    }
    let corpus = store.path().join("_corpus");
    validate("corpus.schema.json", &corpus.join("corpus.json"));
    assert!(corpus.join("corpus.html").is_file());
    let log = std::fs::read_to_string(store.path().join("_logs/progress.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["phase", "book", "status", "elapsed_ms"] {
        assert!(first.get(key).is_some(), "progress line lacks {key}");
    }
}

#[test]
fn analyze_before_annotate_names_the_missing_stamp() {
    let input = input_with(&["alice29.txt"]);
    let store = tempfile::tempdir().unwrap();
    let dirs = [("--in", input.path()), ("--out", store.path())];
    assert!(bookscope(&["ingest"], &dirs).status.success());
    let out = bookscope(&["analyze"], &dirs);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("\"characters\""), "{err}");
    assert!(err.contains("alice29"), "{err}");
}

#[test]
fn report_before_corpus_stats_fails() {
    let store = tempfile::tempdir().unwrap();
    let out = bookscope(&["report"], &[("--out", store.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("corpus-stats"));
}

#[test]
fn rerunning_all_rewrites_nothing() {
    let input = input_with(&["alice29.txt", "asyoulik.txt"]);
    let store = tempfile::tempdir().unwrap();
    let logs = tempfile::tempdir().unwrap();
    let log = logs.path().join("progress.jsonl");
    let dirs = [("--in", input.path()), ("--out", store.path()), ("--log", log.as_path())];
    assert!(bookscope(&["all"], &dirs).status.success());
    let before = mtimes(store.path());
    std::thread::sleep(std::time::Duration::from_millis(20));
    let out = bookscope(&["all"], &dirs);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(mtimes(store.path()), before);
    let skipped = std::fs::read_to_string(&log)
        .unwrap()
        .lines()
        .skip_while(|l| !l.contains("\"report\""))
        .skip_while(|l| l.contains("\"report\""))
        .filter(|l| l.contains("\"skipped\""))
        .count();
    assert!(skipped >= 8, "second run should skip every per-book phase");
}

#[test]
fn force_reannotates() {
    let input = input_with(&["asyoulik.txt"]);
    let store = tempfile::tempdir().unwrap();
    let dirs = [("--in", input.path()), ("--out", store.path())];
    assert!(bookscope(&["ingest"], &dirs).status.success());
    assert!(bookscope(&["annotate"], &dirs).status.success());
    let xml = store.path().join("asyoulik/book.xml");
    let first = std::fs::read(&xml).unwrap();
    let out = bookscope(&["annotate", "--force"], &dirs);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read(&xml).unwrap(), first, "re-annotation is deterministic");
}

#[test]
fn a_bad_book_fails_alone() {
    let input = input_with(&["asyoulik.txt"]);
    std::fs::write(input.path().join("empty.txt"), "   \n").unwrap();
    let store = tempfile::tempdir().unwrap();
    let out = bookscope(&["all"], &[("--in", input.path()), ("--out", store.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty.txt"));
    assert!(store.path().join("asyoulik/index.html").is_file());
}

#[test]
fn duplicates_are_left_out() {
    let input = input_with(&["asyoulik.txt"]);
    std::fs::copy(fixtures().join("asyoulik.txt"), input.path().join("asyoulik_copy.txt")).unwrap();
    let store = tempfile::tempdir().unwrap();
    let out = bookscope(&["all"], &[("--in", input.path()), ("--out", store.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(store.path().join("asyoulik/index.html").is_file());
    assert!(!store.path().join("asyoulik_copy/index.html").exists());
    let index = std::fs::read_to_string(store.path().join("_corpus/index.jsonl")).unwrap();
    assert!(index.contains("\"representative_of\":\"asyoulik\""));
}

#[test]
fn config_file_env_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "jobs = 2\ncharacters.network_window = 40\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bookscope"))
        .args(["config", "--seed", "9", "--config"])
        .arg(&conf)
        .env("BOOKSCOPE_CHARACTERS_NETWORK_WINDOW", "50")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("jobs = 2\n"));
    assert!(text.contains("characters.network_window = 50\n"));
    assert!(text.contains("seed = 9\n"));

    std::fs::write(&conf, "no_such_key = 1\n").unwrap();
    let out = bookscope(&["config"], &[("--config", conf.as_path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no_such_key"));
}
