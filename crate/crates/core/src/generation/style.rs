use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::corpus::NormalizedPoem;
use crate::extraction::Extractor;
use crate::scalar::Scalar;

/// Conditioning vocabulary drawn from a single-style corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleLexicon {
    pub style_name: String,
    pub allowed_theme_words: BTreeSet<String>,
    pub allowed_key_chars: BTreeSet<char>,
}

impl StyleLexicon {
    /// Tokens outside the lexicon, theme words first, in request order.
    pub fn violations(&self, theme_words: &[String], key_chars: &[char]) -> Vec<String> {
        let mut out: Vec<String> = theme_words
            .iter()
            .filter(|t| !self.allowed_theme_words.contains(*t))
            .cloned()
            .collect();
        out.extend(
            key_chars
                .iter()
                .filter(|c| !self.allowed_key_chars.contains(c))
                .map(|c| c.to_string()),
        );
        out
    }

    /// Fails with the offending tokens when any request token is outside
    /// the lexicon.
    pub fn check(&self, theme_words: &[String], key_chars: &[char]) -> Result<(), GenerationError> {
        let bad = self.violations(theme_words, key_chars);
        if bad.is_empty() {
            Ok(())
        } else {
            Err(GenerationError::StyleViolation {
                style: self.style_name.clone(),
                tokens: bad,
            })
        }
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), GenerationError> {
        serde_json::to_writer_pretty(writer, self).map_err(|e| GenerationError::Model(e.to_string()))
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, GenerationError> {
        let lex: StyleLexicon =
            serde_json::from_reader(reader).map_err(|e| GenerationError::InvalidPrompt(format!("bad style lexicon: {e}")))?;
        if lex.allowed_theme_words.is_empty() || lex.allowed_key_chars.is_empty() {
            return Err(GenerationError::EmptyStyleLexicon);
        }
        Ok(lex)
    }
}

/// Union of the default-count theme words and key characters of every
/// poem in `style_corpus`. Poems whose characters have no vectors add
/// theme words only.
pub fn build_style_lexicon<S: Scalar>(
    style_name: &str,
    style_corpus: &[NormalizedPoem],
    extractor: &Extractor<S>,
) -> Result<StyleLexicon, GenerationError> {
    if style_corpus.is_empty() {
        return Err(GenerationError::EmptyCorpus);
    }
    let mut themes = BTreeSet::new();
    let mut keys = BTreeSet::new();
    for poem in style_corpus {
        themes.extend(extractor.theme_words(poem, None));
        if let Ok(k) = extractor.key_terms(poem, None) {
            keys.extend(k.iter().flat_map(|t| t.chars()));
        }
    }
    if themes.is_empty() || keys.is_empty() {
        return Err(GenerationError::EmptyStyleLexicon);
    }
    Ok(StyleLexicon {
        style_name: style_name.to_string(),
        allowed_theme_words: themes,
        allowed_key_chars: keys,
    })
}
