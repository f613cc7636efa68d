//! Tone classes, rhyme groups, genre templates and metrical validation.

mod book;
mod template;
mod validate;

pub use book::{GroupId, Reading, RhymeBook, ToneClass};
pub(crate) use book::intersect;
pub use template::{LineType, MeterTemplate, Strictness};
pub use validate::{
    detect_rhyme_group, validate, LineReport, MeterReport, Overall, RhymeCheck, Verdict,
};

use crate::corpus::Genre;

#[derive(Debug, thiserror::Error)]
pub enum ProsodyError {
    #[error("malformed rhyme book at line {line}: {reason}")]
    MalformedBook { line: usize, reason: String },
    #[error("no template for genre {0}")]
    NoTemplate(Genre),
    #[error("rhyme characters missing from the rhyme book: {}", .0.iter().collect::<String>())]
    MissingChars(Vec<char>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Primary tone of each character of `line`, `Unknown` for characters the
/// book lacks. [`validate`] accepts any reading of a character.
pub fn tone_sequence(line: &str, book: &RhymeBook) -> Vec<ToneClass> {
    line.chars().map(|c| book.tone_of(c)).collect()
}
