//! One JSON line per completed book and phase.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Done,
    Skipped,
    Failed,
}

#[derive(Debug, Serialize)]
pub struct Record<'a> {
    pub phase: &'a str,
    pub book: &'a str,
    pub status: Status,
    pub elapsed_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

pub struct ProgressLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl ProgressLog {
    pub fn new(path: &Path) -> ProgressLog {
        ProgressLog {
            path: path.to_path_buf(),
            lock: Mutex::new(()),
        }
    }

    pub fn record(&self, rec: &Record) {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let line = match serde_json::to_string(rec) {
            Ok(l) => l,
            Err(e) => return log::warn!("progress record: {e}"),
        };
        let result = self
            .path
            .parent()
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|_| {
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&self.path)
            })
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = result {
            log::warn!("cannot append to {}: {e}", self.path.display());
        }
    }
}
