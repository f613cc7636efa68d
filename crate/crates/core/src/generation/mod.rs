//! Prompt assembly, language models and constrained decoding.

mod adapter;
mod decode;
mod lm;
mod ngram;
mod pipeline;
mod prompt;
mod style;

pub use adapter::ProcessModel;
pub use decode::{constrained_decode, DecodeOptions, Decoded, FollowMode};
pub use lm::{LanguageModel, Vocab, END_OF_POEM, LINE_BREAK, START};
pub use ngram::{poem_tokens, train_ngram, NGramModel};
pub use pipeline::{follow_rhyme, generate_fs2text, training_pairs, Generation, TrainingPair};
pub use prompt::{
    assemble_fs2text_prompt, assemble_rr2text_prompt, partial_count, rhyme_constraint, Mode,
    PromptSpec, RhymeConstraint, OPEN_SLOT,
};
pub use style::{build_style_lexicon, StyleLexicon};

use crate::corpus::Genre;
use crate::prosody::{ProsodyError, Strictness};

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("genre {0} has no metrical template")]
    UnsupportedGenre(Genre),
    #[error("first line has {found} characters, the genre needs {expected}")]
    LineLength { expected: usize, found: usize },
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("no common rhyme group")]
    NoCommonRhymeGroup,
    #[error(transparent)]
    Prosody(#[from] ProsodyError),
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("language model: {0}")]
    Model(String),
    #[error("infeasible constraints: no poem found down to {0} strictness")]
    InfeasibleConstraints(Strictness),
    #[error("outside the {style} style lexicon: {}", .tokens.join(" "))]
    StyleViolation { style: String, tokens: Vec<String> },
    #[error("style lexicon is empty")]
    EmptyStyleLexicon,
}
