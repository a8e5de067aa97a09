//! On-disk layout of a store directory.
//!
//! ```text
//! store/<book_id>/book.xml, book.json, index.html
//! store/_corpus/corpus.json, corpus.html, index.jsonl, vectors.bin, stamp, ...
//! store/_logs/progress.jsonl
//! ```

use std::path::{Path, PathBuf};

use bookscope::dedup::CorpusIndex;
use bookscope::{Error, Result};
use sha2::{Digest, Sha256};

pub const BOOK_XML: &str = "book.xml";
pub const CORPUS_DIR: &str = "_corpus";
pub const LOG_DIR: &str = "_logs";
pub const INDEX_FILE: &str = "index.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";
pub const CORPUS_STAMP: &str = "stamp";
pub const DEDUP_STAMP: &str = "dedup.stamp";
pub const PROGRESS_FILE: &str = "progress.jsonl";

pub struct Store {
    pub root: PathBuf,
}

impl Store {
    pub fn new(root: &Path) -> Store {
        Store { root: root.to_path_buf() }
    }

    pub fn book_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn book_xml(&self, id: &str) -> PathBuf {
        self.book_dir(id).join(BOOK_XML)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join(CORPUS_DIR)
    }

    pub fn corpus_file(&self, name: &str) -> PathBuf {
        self.corpus_dir().join(name)
    }

    pub fn progress_log(&self) -> PathBuf {
        self.root.join(LOG_DIR).join(PROGRESS_FILE)
    }

    /// Ids of every book with an XML file, sorted.
    pub fn book_ids(&self) -> Result<Vec<String>> {
        let entries = match std::fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.root, e)),
        };
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('_') || name.starts_with('.') {
                continue;
            }
            if entry.path().join(BOOK_XML).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Books that survived deduplication; every book when dedup has not run.
    pub fn kept_ids(&self) -> Result<Vec<String>> {
        let ids = self.book_ids()?;
        let index_path = self.corpus_file(INDEX_FILE);
        if !index_path.is_file() {
            return Ok(ids);
        }
        let index = CorpusIndex::read_jsonl(&index_path)?;
        let removed: Vec<&str> = index
            .entries
            .iter()
            .filter(|e| e.representative_of.is_some())
            .map(|e| e.id.as_str())
            .collect();
        Ok(ids.into_iter().filter(|id| !removed.contains(&id.as_str())).collect())
    }

    pub fn read_stamp(&self, name: &str) -> Option<String> {
        std::fs::read_to_string(self.corpus_file(name))
            .ok()
            .map(|s| s.trim().to_string())
    }
}

/// Hex SHA-256 over length-prefixed parts, so part boundaries matter.
pub fn digest<I, P>(parts: I) -> String
where
    I: IntoIterator<Item = P>,
    P: AsRef<[u8]>,
{
    let mut h = Sha256::new();
    for part in parts {
        let part = part.as_ref();
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Fingerprint of the word lists in use.
pub fn lexicon_fingerprint(dir: Option<&Path>) -> Result<String> {
    let Some(dir) = dir else {
        return Ok(digest(["bundled", env!("CARGO_PKG_VERSION")]));
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut parts = vec![b"overrides".to_vec()];
    for f in files {
        parts.push(f.file_name().unwrap_or_default().to_string_lossy().as_bytes().to_vec());
        parts.push(std::fs::read(&f).map_err(|e| Error::io(&f, e))?);
    }
    Ok(digest(parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_separates_parts() {
        assert_ne!(digest(["ab", "c"]), digest(["a", "bc"]));
        assert_eq!(digest(["x"]).len(), 64);
    }

    #[test]
    fn underscore_dirs_are_not_books() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["b", "a", "_corpus"] {
            std::fs::create_dir_all(dir.path().join(id)).unwrap();
            std::fs::write(dir.path().join(id).join(BOOK_XML), "x").unwrap();
        }
        std::fs::create_dir_all(dir.path().join("empty")).unwrap();
        assert_eq!(Store::new(dir.path()).book_ids().unwrap(), ["a", "b"]);
    }
}
