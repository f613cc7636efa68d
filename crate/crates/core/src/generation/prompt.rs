use std::fmt;

use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::corpus::{Genre, NormalizedPoem};
use crate::extraction::Extractor;
use crate::prosody::{detect_rhyme_group, MeterTemplate, RhymeBook, ToneClass};
use crate::scalar::Scalar;

/// Placeholder for a line whose final character is unconstrained.
pub const OPEN_SLOT: char = '_';
const SEPARATORS: [char; 2] = [' ', '&'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fs2Text,
    Rr2Text,
}

/// Rhyme of an original poem that a follow-up poem must reuse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhymeConstraint {
    pub group: String,
    /// One slot per line; `Some` at the rhyme positions.
    pub ends: Vec<Option<char>>,
    /// The original's first line, which the new poem must not repeat.
    pub forbidden_first_line: String,
}

impl RhymeConstraint {
    /// Constrained end characters in line order.
    pub fn end_chars(&self) -> Vec<char> {
        self.ends.iter().flatten().copied().collect()
    }

    /// 0-based indices of the constrained lines.
    pub fn positions(&self) -> Vec<usize> {
        self.ends
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|_| i))
            .collect()
    }

    fn render(&self) -> String {
        let ends: String = self.ends.iter().map(|e| e.unwrap_or(OPEN_SLOT)).collect();
        format!("{}:{}/{}", self.group, ends, self.forbidden_first_line)
    }

    fn parse(token: &str) -> Option<RhymeConstraint> {
        let (group, rest) = token.split_once(':')?;
        let (ends, forbidden) = rest.split_once('/')?;
        if group.is_empty() || ends.is_empty() {
            return None;
        }
        Some(RhymeConstraint {
            group: group.to_string(),
            ends: ends.chars().map(|c| (c != OPEN_SLOT).then_some(c)).collect(),
            forbidden_first_line: forbidden.to_string(),
        })
    }
}

/// Structured conditioning input for one generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub mode: Mode,
    pub genre: Genre,
    pub theme_words: Vec<String>,
    pub key_chars: Vec<char>,
    pub first_line: Option<String>,
    pub rhyme: Option<RhymeConstraint>,
}

fn clean_token(t: &str) -> bool {
    !t.is_empty() && !t.contains(SEPARATORS) && !t.contains([':', '/'])
}

impl PromptSpec {
    /// Checks the shape invariants of the spec.
    pub fn check(&self) -> Result<(), GenerationError> {
        let (lines, width) = self.genre.shape().ok_or(GenerationError::UnsupportedGenre(self.genre))?;
        let bad = |m: String| Err(GenerationError::InvalidPrompt(m));
        if let Some(t) = self.theme_words.iter().find(|t| !clean_token(t)) {
            return bad(format!("theme word {t:?} is empty or contains a separator"));
        }
        if let Some(c) = self.key_chars.iter().find(|c| !clean_token(&c.to_string())) {
            return bad(format!("key character {c:?} is a separator"));
        }
        match (self.mode, &self.first_line, &self.rhyme) {
            (Mode::Fs2Text, Some(first), None) => {
                let n = first.chars().count();
                if n != width {
                    return Err(GenerationError::LineLength { expected: width, found: n });
                }
                if !clean_token(first) {
                    return bad(format!("first line {first:?} contains a separator"));
                }
            }
            (Mode::Rr2Text, None, Some(rhyme)) => {
                if rhyme.ends.len() != lines {
                    return bad(format!("rhyme slots {} do not match {lines} lines", rhyme.ends.len()));
                }
                if rhyme.end_chars().is_empty() {
                    return bad("rhyme constraint names no end characters".into());
                }
                if rhyme.forbidden_first_line.contains(SEPARATORS) {
                    return bad("forbidden first line contains a separator".into());
                }
            }
            (Mode::Fs2Text, _, _) => return bad("first-sentence prompts need a first line and no rhyme".into()),
            (Mode::Rr2Text, _, _) => return bad("rhyme prompts need a rhyme and no first line".into()),
        }
        Ok(())
    }

    /// Canonical one-line text: genre, theme words, the key characters as
    /// one block, then the first line or the rhyme token. When exactly one
    /// of the theme and key fields is empty its slot is kept empty so the
    /// text parses back unambiguously.
    pub fn serialize(&self) -> String {
        let mut parts: Vec<String> = vec![self.genre.display_name().to_string()];
        let keys: String = self.key_chars.iter().collect();
        if !self.theme_words.is_empty() || !keys.is_empty() {
            if self.theme_words.is_empty() {
                parts.push(String::new());
            }
            parts.extend(self.theme_words.iter().cloned());
            parts.push(keys);
        }
        parts.push(match (&self.first_line, &self.rhyme) {
            (Some(first), _) => first.clone(),
            (None, Some(r)) => r.render(),
            (None, None) => String::new(),
        });
        parts.join(" ")
    }

    /// Inverse of [`serialize`](Self::serialize); `&` is accepted as a
    /// separator as well. Key blocks split into single characters.
    pub fn parse(text: &str) -> Result<PromptSpec, GenerationError> {
        let bad = || GenerationError::InvalidPrompt(format!("cannot parse prompt {text:?}"));
        let tokens: Vec<&str> = text.trim().split(SEPARATORS).collect();
        if tokens.len() < 2 {
            return Err(bad());
        }
        let genre: Genre = tokens[0].parse().map_err(|_| bad())?;
        let tail = tokens[tokens.len() - 1];
        let middle = &tokens[1..tokens.len() - 1];
        let (themes, keys) = match middle.split_last() {
            None => (&[][..], ""),
            Some((keys, themes)) => (themes, *keys),
        };
        let theme_words: Vec<String> = themes.iter().filter(|t| !t.is_empty()).map(|t| t.to_string()).collect();
        let key_chars: Vec<char> = keys.chars().collect();
        let spec = match RhymeConstraint::parse(tail) {
            Some(rhyme) => PromptSpec {
                mode: Mode::Rr2Text,
                genre,
                theme_words,
                key_chars,
                first_line: None,
                rhyme: Some(rhyme),
            },
            None => PromptSpec {
                mode: Mode::Fs2Text,
                genre,
                theme_words,
                key_chars,
                first_line: Some(tail.to_string()),
                rhyme: None,
            },
        };
        spec.check()?;
        Ok(spec)
    }

    /// Characters the decoder should favour.
    pub fn conditioning_chars(&self) -> Vec<char> {
        let mut out: Vec<char> = Vec::new();
        for c in self.theme_words.iter().flat_map(|t| t.chars()).chain(self.key_chars.iter().copied()) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

impl fmt::Display for PromptSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// First-sentence prompt. Fails when the first line does not have the
/// genre's line length.
pub fn assemble_fs2text_prompt(
    genre: Genre,
    theme_words: &[String],
    key_chars: &[char],
    first_line: &str,
) -> Result<PromptSpec, GenerationError> {
    let spec = PromptSpec {
        mode: Mode::Fs2Text,
        genre,
        theme_words: theme_words.to_vec(),
        key_chars: key_chars.to_vec(),
        first_line: Some(first_line.to_string()),
        rhyme: None,
    };
    spec.check()?;
    Ok(spec)
}

/// `ceil(fraction × n)`, clamped to `0..=n`.
pub fn partial_count(fraction: f64, n: usize) -> usize {
    ((fraction.clamp(0.0, 1.0) * n as f64).ceil() as usize).min(n)
}

/// Rhyme constraint of `original`: the common group of its rhyme lines and
/// their end characters, including line 1 when it rhymes too.
pub fn rhyme_constraint(
    original: &NormalizedPoem,
    book: &RhymeBook,
) -> Result<RhymeConstraint, GenerationError> {
    let genre = original.genre();
    let tpl = MeterTemplate::for_genre(genre).ok_or(GenerationError::UnsupportedGenre(genre))?;
    let groups = detect_rhyme_group(original, book)?;
    let end = |i: usize| *original.line_chars(i).last().expect("non-empty line");
    let mut lines = tpl.rhyme_lines.clone();
    // prefer a level-tone reading shared by every rhyme character
    let group = groups
        .iter()
        .copied()
        .find(|&g| {
            lines.iter().all(|&i| {
                book.readings(end(i))
                    .iter()
                    .any(|r| r.group == g && r.tone == ToneClass::Ping)
            })
        })
        .or_else(|| groups.first().copied())
        .ok_or(GenerationError::NoCommonRhymeGroup)?;
    if book.in_group(end(0), group) {
        lines.insert(0, 0);
    }
    let mut ends = vec![None; tpl.line_count];
    for i in lines {
        ends[i] = Some(end(i));
    }
    Ok(RhymeConstraint {
        group: book.group_name(group).to_string(),
        ends,
        forbidden_first_line: original.lines[0].clone(),
    })
}

/// Rhyme-following prompt: the original's rhyme plus the leading share of
/// its extracted theme words and key characters.
pub fn assemble_rr2text_prompt<S: Scalar>(
    original: &NormalizedPoem,
    book: &RhymeBook,
    extractor: &Extractor<S>,
    theme_fraction: f64,
    key_fraction: f64,
) -> Result<PromptSpec, GenerationError> {
    let rhyme = rhyme_constraint(original, book)?;
    let mut theme_words = extractor.theme_words(original, None);
    theme_words.truncate(partial_count(theme_fraction, theme_words.len()));
    let mut key_chars: Vec<char> = extractor
        .key_terms(original, None)
        .unwrap_or_default()
        .iter()
        .flat_map(|t| t.chars())
        .collect();
    key_chars.truncate(partial_count(key_fraction, key_chars.len()));
    let spec = PromptSpec {
        mode: Mode::Rr2Text,
        genre: original.genre(),
        theme_words,
        key_chars,
        first_line: None,
        rhyme: Some(rhyme),
    };
    spec.check()?;
    Ok(spec)
}
