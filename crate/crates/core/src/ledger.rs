//! Append-only record of generated poems, keyed by content digest.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::normalize_text;

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("poem text is empty")]
    EmptyPoem,
    #[error("corrupt ledger line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("ledger storage: {0}")]
    Io(#[from] std::io::Error),
}

/// One generated poem and how it was made.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub entry_id: String,
    pub normalized_text: String,
    pub raw_text: String,
    #[serde(with = "utc_seconds")]
    pub created_at: DateTime<Utc>,
    pub prompt: String,
    pub lm_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt: String,
    pub lm_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Recorded {
    pub entry_id: String,
    /// False when the text was already present.
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub found: bool,
    pub entry: Option<LedgerEntry>,
}

mod utc_seconds {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

/// Punctuation- and whitespace-free form of `text`, or `None` when nothing
/// remains.
pub fn normalized_text(text: &str) -> Option<String> {
    normalize_text(text).ok().map(|p| p.text())
}

/// Hex SHA-256 of the normalized text.
pub fn entry_id(normalized: &str) -> String {
    hex::encode(Sha256::digest(normalized.as_bytes()))
}

/// JSON-lines ledger. Entries are only ever appended; the digest index and
/// the hit counters live in memory and are rebuilt on open.
#[derive(Debug)]
pub struct Ledger {
    path: Option<PathBuf>,
    file: Option<File>,
    entries: Vec<LedgerEntry>,
    index: HashMap<String, usize>,
    hits: HashMap<String, u64>,
}

impl Ledger {
    /// A ledger that is never written to disk.
    pub fn in_memory() -> Self {
        Ledger {
            path: None,
            file: None,
            entries: Vec::new(),
            index: HashMap::new(),
            hits: HashMap::new(),
        }
    }

    /// Opens or creates the ledger file at `path` and loads its entries.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let mut ledger = Ledger::in_memory();
        for (i, line) in BufReader::new(&file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LedgerEntry = serde_json::from_str(&line).map_err(|e| LedgerError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            ledger.insert(entry);
        }
        ledger.path = Some(path);
        ledger.file = Some(file);
        Ok(ledger)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn insert(&mut self, entry: LedgerEntry) {
        if !self.index.contains_key(&entry.entry_id) {
            self.index.insert(entry.entry_id.clone(), self.entries.len());
            self.entries.push(entry);
        }
    }

    /// Appends `raw_text` unless its normalized text is already present, in
    /// which case the existing id is returned and its hit count bumped.
    /// A failed write leaves the file as it was.
    pub fn record(&mut self, raw_text: &str, provenance: &Provenance) -> Result<Recorded, LedgerError> {
        let normalized = normalized_text(raw_text).ok_or(LedgerError::EmptyPoem)?;
        let id = entry_id(&normalized);
        if self.index.contains_key(&id) {
            *self.hits.entry(id.clone()).or_insert(0) += 1;
            return Ok(Recorded { entry_id: id, created: false });
        }
        let entry = LedgerEntry {
            entry_id: id.clone(),
            normalized_text: normalized,
            raw_text: raw_text.to_string(),
            created_at: Utc::now().trunc_subsecs(0),
            prompt: provenance.prompt.clone(),
            lm_id: provenance.lm_id.clone(),
            seed: provenance.seed,
        };
        if let Some(file) = self.file.as_mut() {
            let mut line = serde_json::to_string(&entry).expect("entry serializes");
            line.push('\n');
            let before = file.seek(SeekFrom::End(0))?;
            let written = file
                .write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .and_then(|_| file.sync_data());
            if let Err(e) = written {
                let _ = file.set_len(before);
                return Err(e.into());
            }
        }
        self.insert(entry);
        Ok(Recorded { entry_id: id, created: true })
    }

    /// Exact lookup of the normalized text.
    pub fn check(&self, text: &str) -> CheckResult {
        let entry = normalized_text(text)
            .and_then(|n| self.index.get(&entry_id(&n)))
            .map(|&i| self.entries[i].clone());
        CheckResult {
            found: entry.is_some(),
            entry,
        }
    }

    pub fn get(&self, entry_id: &str) -> Option<&LedgerEntry> {
        self.index.get(entry_id).map(|&i| &self.entries[i])
    }

    /// Entries in insertion order.
    pub fn list(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Repeat recordings of `entry_id` since this ledger was opened.
    pub fn hits(&self, entry_id: &str) -> u64 {
        self.hits.get(entry_id).copied().unwrap_or(0)
    }
}
