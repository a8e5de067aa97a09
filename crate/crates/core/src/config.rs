//! Run configuration: a flat `key = value` file with dotted keys, overridable
//! per key from the environment.
//!
//! ```text
//! # comment
//! seed = 7
//! characters.network_window = 30
//! mirror_url = "https://www.gutenberg.org"
//! ```
//!
//! Values are read as JSON when they parse as JSON and as plain strings
//! otherwise. The environment variable for `characters.network_window` is
//! `BOOKSCOPE_CHARACTERS_NETWORK_WINDOW`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::analytics::AnalyticsConfig;
use crate::characters::CharacterConfig;
use crate::dedup::DedupConfig;
use crate::error::{Error, Result};
use crate::ingest::MatterConfig;
use crate::pipeline::BookConfig;

pub const ENV_PREFIX: &str = "BOOKSCOPE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Corpus label stored with every book.
    pub corpus: String,
    /// Base URL of the Gutenberg mirror used by `fetch`.
    pub mirror_url: String,
    /// Gutenberg ids to download with `fetch`.
    pub fetch_ids: Vec<u64>,
    /// Directory of word lists replacing the bundled ones, file by file.
    pub lexicon_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// When set, seeds both MinHash and embedding training.
    pub seed: Option<u64>,
    pub matter: MatterConfig,
    pub characters: CharacterConfig,
    pub dedup: DedupConfig,
    pub analytics: AnalyticsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            corpus: "gutenberg".into(),
            mirror_url: "https://www.gutenberg.org".into(),
            fetch_ids: Vec::new(),
            lexicon_dir: None,
            jobs: 0,
            seed: None,
            matter: MatterConfig::default(),
            characters: CharacterConfig::default(),
            dedup: DedupConfig::default(),
            analytics: AnalyticsConfig::default(),
        }
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {part} is not a section")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Environment variable name for a dotted key.
pub fn env_var(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
}

impl Config {
    /// Every dotted key with its default value, in file order.
    pub fn keys() -> Vec<(String, Value)> {
        let mut out = Vec::new();
        flatten("", &serde_json::to_value(Config::default()).unwrap(), &mut out);
        out
    }

    /// Parses the flat file format on top of the defaults.
    pub fn parse(text: &str) -> Result<Config> {
        Config::from_pairs(parse_pairs(text)?)
    }

    fn from_pairs(pairs: Vec<(String, String)>) -> Result<Config> {
        let known: Vec<String> = Config::keys().into_iter().map(|k| k.0).collect();
        let mut root = serde_json::to_value(Config::default())?;
        for (key, raw) in pairs {
            if !known.contains(&key) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
            set_path(&mut root, &key, parse_value(&raw))?;
        }
        serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path` (when given), then applies environment overrides from
    /// `env`.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Config> {
        let mut pairs = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        for (key, _) in Config::keys() {
            if let Some(v) = env(&env_var(&key)) {
                pairs.push((key, v));
            }
        }
        Config::from_pairs(pairs)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn dedup_config(&self) -> DedupConfig {
        let mut d = self.dedup.clone();
        if let Some(s) = self.seed {
            d.base_seed = s;
        }
        d
    }

    pub fn analytics_config(&self) -> AnalyticsConfig {
        let mut a = self.analytics.clone();
        if let Some(s) = self.seed {
            a.embedding.seed = s;
        }
        a
    }

    pub fn book_config(&self) -> BookConfig {
        BookConfig {
            matter: self.matter.clone(),
            characters: self.characters.clone(),
        }
    }

    /// The flat file form of this configuration, one key per line.
    pub fn to_flat(&self) -> String {
        let mut out = Vec::new();
        flatten("", &serde_json::to_value(self).unwrap(), &mut out);
        out.iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::CoOccurrence;

    #[test]
    fn defaults_from_empty_file() {
        assert_eq!(Config::parse("# nothing\n\n").unwrap(), Config::default());
    }

    #[test]
    fn dotted_keys_and_types() {
        let c = Config::parse(
            "seed = 7\ncharacters.network_window = 40\ncharacters.co_occurrence = windows\n\
             mirror_url = https://example.org\nanalytics.embedding.min_count = 1\nfetch_ids = [730, 11]\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.characters.network_window, 40);
        assert_eq!(c.characters.co_occurrence, CoOccurrence::Windows);
        assert_eq!(c.mirror_url, "https://example.org");
        assert_eq!(c.analytics.embedding.min_count, 1);
        assert_eq!(c.fetch_ids, [730, 11]);
        assert_eq!(c.dedup_config().base_seed, 7);
        assert_eq!(c.analytics_config().embedding.seed, 7);
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(matches!(Config::parse("nonsense.key = 1"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("jobs = many"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("just words"), Err(Error::Config(_))));
    }

    #[test]
    fn environment_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "jobs = 2\ndedup.content_threshold = 0.9\n").unwrap();
        let env = |k: &str| match k {
            "BOOKSCOPE_JOBS" => Some("3".to_string()),
            "BOOKSCOPE_CHARACTERS_NETWORK_MIN_CO" => Some("8".to_string()),
            _ => None,
        };
        let c = Config::load(Some(&path), env).unwrap();
        assert_eq!(c.jobs, 3);
        assert_eq!(c.characters.network_min_co, 8);
        assert_eq!(c.dedup.content_threshold, 0.9);
    }

    #[test]
    fn flat_form_round_trips() {
        let mut c = Config::default();
        c.seed = Some(3);
        c.lexicon_dir = Some("lex".into());
        c.analytics.embedding.dim = 16;
        assert_eq!(Config::parse(&c.to_flat()).unwrap(), c);
    }

    #[test]
    fn every_key_is_documented() {
        let docs = include_str!("../../../docs/config.md");
        for (key, _) in Config::keys() {
            assert!(docs.contains(&format!("`{key}`")), "docs/config.md lacks {key}");
        }
    }
}
