//! Turing-style discrimination test, significance, and conformance metrics.

mod compliance;
mod stats;
mod turing;

pub use compliance::{compliance_metrics, ComplianceReport};
pub use stats::{binomial_pvalue, EXACT_LIMIT};
pub use turing::{
    build_turing_set, parse_responses, score_responses, Answer, AnswerKey, Choice, ItemScore,
    RejectedSheet, ResponseSheet, ScoreReport, TuringItem,
};

#[derive(Debug, thiserror::Error)]
pub enum EvaluationError {
    #[error("pair {index}: {reason}")]
    PairMismatch { index: usize, reason: String },
    #[error("responses line {line}: {reason}")]
    Responses { line: usize, reason: String },
    #[error("binomial test needs at least one trial")]
    NoTrials,
    #[error("{k} successes out of {n} trials")]
    InvalidCount { n: u64, k: u64 },
    #[error("success probability must lie strictly between 0 and 1, got {0}")]
    InvalidProbability(f64),
}
