//! Service configuration: a `key = value` file overridden by `GUIYUN_*`
//! environment variables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use guiyun::prosody::Strictness;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("config key {key}: {reason}")]
    Value { key: String, reason: String },
}

/// Where every resource comes from. Unset paths fall back to the data
/// bundled with the library.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub bind: String,
    pub ledger: PathBuf,
    pub rhyme_book: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Saved n-gram model; trained from the corpus when unset.
    pub lm: Option<PathBuf>,
    pub lm_order: usize,
    /// Command line of an external model process, split on whitespace.
    pub lm_command: Option<String>,
    pub beam_width: usize,
    pub strictness: Strictness,
    /// Allowed browser origins, `*` for any.
    pub cors_origins: Vec<String>,
    pub styles: BTreeMap<String, PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: "127.0.0.1:8080".into(),
            ledger: PathBuf::from("guiyun-ledger.jsonl"),
            rhyme_book: None,
            corpus: None,
            embeddings: None,
            lexicon: None,
            stopwords: None,
            lm: None,
            lm_order: 3,
            lm_command: None,
            beam_width: 16,
            strictness: Strictness::Relaxed,
            cors_origins: vec!["*".into()],
            styles: BTreeMap::new(),
        }
    }
}

impl Config {
    /// Defaults, then `path` if given, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            config.apply_text(&text)?;
        }
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies `GUIYUN_<KEY>` variables; `GUIYUN_STYLE_<NAME>` adds a style.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix("GUIYUN_") else { continue };
            let key = key.to_ascii_lowercase();
            let key = match key.strip_prefix("style_") {
                Some(style) => format!("style.{style}"),
                None => key,
            };
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::Value {
            key: key.to_string(),
            reason,
        };
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "bind" => self.bind = value.to_string(),
            "ledger" => self.ledger = PathBuf::from(value),
            "rhyme_book" => self.rhyme_book = path(),
            "corpus" => self.corpus = path(),
            "embeddings" => self.embeddings = path(),
            "lexicon" => self.lexicon = path(),
            "stopwords" => self.stopwords = path(),
            "lm" => self.lm = path(),
            "lm_command" => self.lm_command = (!value.is_empty()).then(|| value.to_string()),
            "lm_order" => self.lm_order = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "beam_width" => self.beam_width = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "strictness" => self.strictness = value.parse().map_err(|e: String| bad(e))?,
            "cors_origins" => {
                self.cors_origins = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            _ => match key.strip_prefix("style.") {
                Some(name) if !name.is_empty() => {
                    self.styles.insert(name.to_string(), PathBuf::from(value));
                }
                _ => return Err(bad("unknown key".into())),
            },
        }
        Ok(())
    }
}
