use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::decode::{constrained_decode, DecodeOptions, Decoded};
use super::lm::LanguageModel;
use super::prompt::{assemble_fs2text_prompt, assemble_rr2text_prompt, rhyme_constraint, Mode, PromptSpec};
use super::style::StyleLexicon;
use super::GenerationError;
use crate::corpus::{Genre, NormalizedPoem};
use crate::extraction::Extractor;
use crate::prosody::{MeterReport, RhymeBook, Strictness};
use crate::scalar::Scalar;

/// A generated poem with what produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Generation<S> {
    pub poem: NormalizedPoem,
    /// The poem with conventional punctuation.
    pub text: String,
    pub prompt: PromptSpec,
    pub prompt_text: String,
    pub seed: u64,
    pub beam_width: usize,
    pub requested_strictness: Strictness,
    pub strictness: Strictness,
    pub notes: Vec<String>,
    pub lm: String,
    pub log_prob: S,
    pub report: MeterReport,
}

fn wrap<S: Scalar>(
    decoded: Decoded<S>,
    prompt: PromptSpec,
    lm_name: String,
    options: &DecodeOptions<S>,
) -> Generation<S> {
    Generation {
        text: decoded.poem.display(),
        poem: decoded.poem,
        prompt_text: prompt.serialize(),
        prompt,
        seed: options.seed,
        beam_width: options.beam_width,
        requested_strictness: decoded.requested_strictness,
        strictness: decoded.strictness,
        notes: decoded.notes,
        lm: lm_name,
        log_prob: decoded.log_prob,
        report: decoded.report,
    }
}

/// First-sentence generation. With a style lexicon, any theme word or key
/// character outside it is rejected before decoding.
#[allow(clippy::too_many_arguments)]
pub fn generate_fs2text<S: Scalar, L: LanguageModel<S> + ?Sized>(
    first_line: &str,
    genre: Genre,
    theme_words: &[String],
    key_chars: &[char],
    style: Option<&StyleLexicon>,
    lm: &L,
    book: &RhymeBook,
    options: &DecodeOptions<S>,
) -> Result<Generation<S>, GenerationError> {
    if let Some(style) = style {
        style.check(theme_words, key_chars)?;
    }
    let prompt = assemble_fs2text_prompt(genre, theme_words, key_chars, first_line)?;
    let decoded = constrained_decode(lm, &prompt, book, options)?;
    Ok(wrap(decoded, prompt, lm.name(), options))
}

/// Writes a new poem on the rhyme of `original`.
pub fn follow_rhyme<S: Scalar, L: LanguageModel<S> + ?Sized>(
    original: &NormalizedPoem,
    extractor: &Extractor<S>,
    lm: &L,
    book: &RhymeBook,
    options: &DecodeOptions<S>,
    theme_fraction: f64,
    key_fraction: f64,
) -> Result<Generation<S>, GenerationError> {
    let prompt = assemble_rr2text_prompt(original, book, extractor, theme_fraction, key_fraction)?;
    let decoded = constrained_decode(lm, &prompt, book, options)?;
    Ok(wrap(decoded, prompt, lm.name(), options))
}

/// One model-input / model-output example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrainingPair {
    pub prompt: String,
    pub target: String,
}

/// Prompt/target pairs for fine-tuning a sequence-to-sequence model. Each
/// poem keeps a uniformly drawn number of its ranked theme words and key
/// characters, from none to all. Poems outside the regulated forms, or
/// without a common rhyme group in rhyme mode, are skipped.
pub fn training_pairs<S: Scalar>(
    corpus: &[NormalizedPoem],
    extractor: &Extractor<S>,
    book: &RhymeBook,
    mode: Mode,
    seed: u64,
) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for poem in corpus {
        let genre = poem.genre();
        if genre == Genre::Other || poem.has_gaps {
            continue;
        }
        let mut themes = extractor.theme_words(poem, None);
        let mut keys: Vec<char> = extractor
            .key_terms(poem, None)
            .unwrap_or_default()
            .iter()
            .flat_map(|t| t.chars())
            .collect();
        let kt = rng.random_range(0..=themes.len());
        let kk = rng.random_range(0..=keys.len());
        themes.truncate(kt);
        keys.truncate(kk);
        let prompt = match mode {
            Mode::Fs2Text => assemble_fs2text_prompt(genre, &themes, &keys, &poem.lines[0]),
            Mode::Rr2Text => rhyme_constraint(poem, book).map(|rhyme| PromptSpec {
                mode,
                genre,
                theme_words: themes,
                key_chars: keys,
                first_line: None,
                rhyme: Some(rhyme),
            }),
        };
        if let Ok(prompt) = prompt {
            out.push(TrainingPair {
                prompt: prompt.serialize(),
                target: poem.display(),
            });
        }
    }
    out
}
