//! Regulated classical Chinese verse: corpus handling, tone and rhyme
//! checking, prompt extraction, constrained generation, evaluation and a
//! provenance ledger.
//!
//! Numeric components are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choice.

pub mod assets;
pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod generation;
pub mod ledger;
pub mod prosody;
pub mod scalar;

pub use corpus::{Genre, NormalizedPoem};
pub use evaluation::EvaluationError;
pub use extraction::ExtractionError;
pub use generation::GenerationError;
pub use ledger::{Ledger, LedgerError};
pub use prosody::{ProsodyError, RhymeBook, Strictness};
pub use scalar::Scalar;

pub type IdfTableF64 = extraction::IdfTable<f64>;
pub type IdfTableF32 = extraction::IdfTable<f32>;
pub type EmbeddingTableF64 = extraction::EmbeddingTable<f64>;
pub type EmbeddingTableF32 = extraction::EmbeddingTable<f32>;
pub type ExtractorF64 = extraction::Extractor<f64>;
pub type ExtractorF32 = extraction::Extractor<f32>;
pub type NGramModelF64 = generation::NGramModel<f64>;
pub type NGramModelF32 = generation::NGramModel<f32>;
pub type DecodeOptionsF64 = generation::DecodeOptions<f64>;
pub type GenerationF64 = generation::Generation<f64>;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Prosody(#[from] ProsodyError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}
