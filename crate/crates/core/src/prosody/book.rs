use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::ProsodyError;

/// Level (平) or oblique (仄) tone class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToneClass {
    Ping,
    Ze,
    /// Absent from the book.
    Unknown,
}

impl ToneClass {
    pub fn symbol(self) -> char {
        match self {
            ToneClass::Ping => '平',
            ToneClass::Ze => '仄',
            ToneClass::Unknown => '？',
        }
    }
}

impl fmt::Display for ToneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Index of a rhyme group inside one [`RhymeBook`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupId(pub(crate) u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Reading {
    pub group: GroupId,
    pub tone: ToneClass,
}

/// Character → (rhyme group, tone) readings.
///
/// Loaded from `char<TAB>group<TAB>tone` lines with tone `平` or `仄`.
/// Blank lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, Default)]
pub struct RhymeBook {
    name: String,
    groups: Vec<String>,
    group_index: HashMap<String, GroupId>,
    readings: HashMap<char, Vec<Reading>>,
}

impl RhymeBook {
    pub fn load<R: BufRead>(reader: R, name: &str) -> Result<Self, ProsodyError> {
        let mut book = RhymeBook {
            name: name.to_string(),
            ..Default::default()
        };
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| ProsodyError::MalformedBook {
                line: line_no,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(malformed("expected 3 tab-separated fields"));
            }
            let mut chars = fields[0].chars();
            let (Some(ch), None) = (chars.next(), chars.next()) else {
                return Err(malformed("first field must be a single character"));
            };
            let group = fields[1].trim();
            if group.is_empty() {
                return Err(malformed("empty rhyme group"));
            }
            let tone = match fields[2].trim() {
                "平" => ToneClass::Ping,
                "仄" => ToneClass::Ze,
                other => return Err(malformed(&format!("tone must be 平 or 仄, got {other:?}"))),
            };
            book.insert(ch, group, tone)
                .map_err(|_| malformed("too many rhyme groups"))?;
        }
        Ok(book)
    }

    pub fn from_tsv(text: &str, name: &str) -> Result<Self, ProsodyError> {
        Self::load(text.as_bytes(), name)
    }

    fn insert(&mut self, ch: char, group: &str, tone: ToneClass) -> Result<(), ()> {
        let gid = match self.group_index.get(group) {
            Some(&g) => g,
            None => {
                let g = GroupId(u16::try_from(self.groups.len()).map_err(|_| ())?);
                self.groups.push(group.to_string());
                self.group_index.insert(group.to_string(), g);
                g
            }
        };
        let reading = Reading { group: gid, tone };
        let entry = self.readings.entry(ch).or_default();
        if !entry.contains(&reading) {
            entry.push(reading);
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of characters with at least one reading.
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn contains(&self, c: char) -> bool {
        self.readings.contains_key(&c)
    }

    pub fn readings(&self, c: char) -> &[Reading] {
        self.readings.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.readings.keys().copied()
    }

    pub fn group_name(&self, g: GroupId) -> &str {
        &self.groups[g.0 as usize]
    }

    pub fn group_id(&self, name: &str) -> Option<GroupId> {
        self.group_index.get(name).copied()
    }

    /// Whether some reading of `c` has tone `tone`.
    pub fn has_tone(&self, c: char, tone: ToneClass) -> bool {
        self.readings(c).iter().any(|r| r.tone == tone)
    }

    /// Sorted, deduplicated groups of `c`, optionally restricted to readings
    /// of one tone.
    pub fn groups_of(&self, c: char, tone: Option<ToneClass>) -> Vec<GroupId> {
        let mut out: Vec<GroupId> = self
            .readings(c)
            .iter()
            .filter(|r| tone.is_none_or(|t| r.tone == t))
            .map(|r| r.group)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn in_group(&self, c: char, g: GroupId) -> bool {
        self.readings(c).iter().any(|r| r.group == g)
    }

    /// Tone of the first listed reading of `c`, `Unknown` when absent.
    /// Checks against a required tone should use [`has_tone`](Self::has_tone).
    pub fn tone_of(&self, c: char) -> ToneClass {
        self.readings(c).first().map_or(ToneClass::Unknown, |r| r.tone)
    }
}

/// Intersection of two sorted group lists.
pub(crate) fn intersect(a: &[GroupId], b: &[GroupId]) -> Vec<GroupId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
