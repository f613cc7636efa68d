//! Corpus ingestion: the four-field CSV storage format, line normalization,
//! genre classification and content-hash deduplication.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Placeholder the source data uses for characters that cannot be displayed.
pub const GAP: char = '?';

/// Exact header row of the storage format.
pub const HEADER: [&str; 4] = ["title", "dynasty", "author", "content"];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 at byte offset {offset}")]
    Utf8 { offset: usize },
    #[error("empty poem")]
    EmptyPoem,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One corpus row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoemRecord {
    pub title: String,
    pub dynasty: String,
    pub author: String,
    pub content: String,
    /// Opaque provenance tag, e.g. `file.csv:12`.
    #[serde(default)]
    pub source_id: String,
}

impl PoemRecord {
    pub fn new(title: &str, dynasty: &str, author: &str, content: &str) -> Self {
        PoemRecord {
            title: title.to_string(),
            dynasty: dynasty.to_string(),
            author: author.to_string(),
            content: content.to_string(),
            source_id: String::new(),
        }
    }
}

/// A row the parser could not turn into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    /// 1-based line in the input where the row starts.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default, Clone)]
pub struct ParsedCorpus {
    pub records: Vec<PoemRecord>,
    pub errors: Vec<RowError>,
}

/// Parses the four-field CSV format. The header row is optional and detected
/// by exact field names. Malformed rows are collected and skipped; invalid
/// UTF-8 anywhere in the stream is fatal.
pub fn parse_corpus<R: Read>(mut reader: R, source: &str) -> Result<ParsedCorpus, CorpusError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Utf8 {
        offset: e.valid_up_to(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut out = ParsedCorpus::default();
    for (row, result) in rdr.records().enumerate() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 1);
        if row == 0 && record.iter().eq(HEADER.iter().copied()) {
            continue;
        }
        if record.len() != 4 {
            out.errors.push(RowError {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
            continue;
        }
        if record[3].trim().is_empty() {
            out.errors.push(RowError {
                line,
                message: "empty content".into(),
            });
            continue;
        }
        out.records.push(PoemRecord {
            title: record[0].to_string(),
            dynasty: record[1].to_string(),
            author: record[2].to_string(),
            content: record[3].to_string(),
            source_id: format!("{source}:{line}"),
        });
    }
    Ok(out)
}

/// Writes records in the storage format, header included.
pub fn write_corpus<W: Write>(writer: W, records: &[PoemRecord]) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HEADER)?;
    for r in records {
        wtr.write_record([&r.title, &r.dynasty, &r.author, &r.content])?;
    }
    wtr.flush()?;
    Ok(())
}

/// A run of removed (non-poem) characters and the number of poem characters
/// that precede it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunctuationRun {
    pub offset: usize,
    pub text: String,
}

/// Poem content split into punctuation-free lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedPoem {
    pub lines: Vec<String>,
    pub line_lengths: Vec<usize>,
    pub char_count: usize,
    pub has_gaps: bool,
    pub punctuation_map: Vec<PunctuationRun>,
}

fn is_poem_char(c: char) -> bool {
    c == GAP || c.is_alphanumeric()
}

fn is_line_delimiter(c: char) -> bool {
    c.is_whitespace() || "，。？！、；：,.!;:".contains(c)
}

impl NormalizedPoem {
    /// Builds a poem from already-clean lines, with the conventional
    /// `，`/`。` punctuation used for display.
    pub fn from_lines<I, L>(lines: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = L>,
        L: AsRef<str>,
    {
        let mut text = String::new();
        for (i, line) in lines.into_iter().enumerate() {
            text.push_str(line.as_ref());
            text.push(if i % 2 == 0 { '，' } else { '。' });
        }
        normalize_text(&text)
    }

    /// Concatenated lines.
    pub fn text(&self) -> String {
        self.lines.concat()
    }

    pub fn line_chars(&self, i: usize) -> Vec<char> {
        self.lines[i].chars().collect()
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.lines.iter().flat_map(|l| l.chars())
    }

    /// Reconstructs the original content from the lines and the
    /// punctuation map.
    pub fn display(&self) -> String {
        let mut out = String::new();
        let mut runs = self.punctuation_map.iter().peekable();
        for (i, c) in self.chars().enumerate() {
            while let Some(run) = runs.next_if(|r| r.offset == i) {
                out.push_str(&run.text);
            }
            out.push(c);
        }
        for run in runs {
            out.push_str(&run.text);
        }
        out
    }

    /// Hex SHA-256 of the punctuation- and whitespace-free content.
    pub fn content_digest(&self) -> String {
        hex::encode(Sha256::digest(self.text().as_bytes()))
    }

    pub fn genre(&self) -> Genre {
        classify_genre(self)
    }
}

pub fn normalize(record: &PoemRecord) -> Result<NormalizedPoem, CorpusError> {
    normalize_text(&record.content)
}

/// Splits raw text into lines on sentence punctuation and whitespace and
/// strips every non-poem character.
pub fn normalize_text(content: &str) -> Result<NormalizedPoem, CorpusError> {
    let mut lines = Vec::new();
    let mut current = String::new();
    let mut runs: Vec<PunctuationRun> = Vec::new();
    let mut count = 0usize;
    let mut has_gaps = false;

    for c in content.chars() {
        if is_poem_char(c) {
            has_gaps |= c == GAP;
            current.push(c);
            count += 1;
            continue;
        }
        match runs.last_mut() {
            Some(run) if run.offset == count => run.text.push(c),
            _ => runs.push(PunctuationRun {
                offset: count,
                text: c.to_string(),
            }),
        }
        if is_line_delimiter(c) && !current.is_empty() {
            lines.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }
    if count == 0 {
        return Err(CorpusError::EmptyPoem);
    }
    let line_lengths: Vec<usize> = lines.iter().map(|l| l.chars().count()).collect();
    Ok(NormalizedPoem {
        lines,
        line_lengths,
        char_count: count,
        has_gaps,
        punctuation_map: runs,
    })
}

/// Poem form. Regulated forms carry a fixed shape; everything else is `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    #[serde(alias = "五言绝句")]
    Wujue,
    #[serde(alias = "七言绝句")]
    Qijue,
    #[serde(alias = "五言律诗")]
    Wulv,
    #[serde(alias = "七言律诗")]
    Qilv,
    Other,
}

impl Genre {
    pub const REGULATED: [Genre; 4] = [Genre::Wujue, Genre::Qijue, Genre::Wulv, Genre::Qilv];

    /// `(line count, characters per line)`.
    pub fn shape(self) -> Option<(usize, usize)> {
        match self {
            Genre::Wujue => Some((4, 5)),
            Genre::Qijue => Some((4, 7)),
            Genre::Wulv => Some((8, 5)),
            Genre::Qilv => Some((8, 7)),
            Genre::Other => None,
        }
    }

    pub fn line_count(self) -> Option<usize> {
        self.shape().map(|s| s.0)
    }

    pub fn line_width(self) -> Option<usize> {
        self.shape().map(|s| s.1)
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Genre::Wujue => "五言绝句",
            Genre::Qijue => "七言绝句",
            Genre::Wulv => "五言律诗",
            Genre::Qilv => "七言律诗",
            Genre::Other => "其他",
        }
    }

    pub fn from_shape(lines: usize, width: usize) -> Genre {
        Genre::REGULATED
            .into_iter()
            .find(|g| g.shape() == Some((lines, width)))
            .unwrap_or(Genre::Other)
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown genre {0:?}")]
pub struct UnknownGenre(pub String);

impl FromStr for Genre {
    type Err = UnknownGenre;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let found = [Genre::Wujue, Genre::Qijue, Genre::Wulv, Genre::Qilv, Genre::Other]
            .into_iter()
            .find(|g| {
                g.display_name() == s || format!("{g:?}").eq_ignore_ascii_case(s)
            });
        found.ok_or_else(|| UnknownGenre(s.to_string()))
    }
}

/// Classifies by line count and uniform line length only.
pub fn classify_genre(poem: &NormalizedPoem) -> Genre {
    let Some(&width) = poem.line_lengths.first() else {
        return Genre::Other;
    };
    if poem.line_lengths.iter().any(|&l| l != width) {
        return Genre::Other;
    }
    Genre::from_shape(poem.lines.len(), width)
}

/// Drops records whose normalized content repeats an earlier record's,
/// keeping the first occurrence. Records that do not normalize are kept.
pub fn deduplicate(records: Vec<PoemRecord>) -> Vec<PoemRecord> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|r| match normalize(r) {
            Ok(p) => seen.insert(p.content_digest()),
            Err(_) => true,
        })
        .collect()
}
