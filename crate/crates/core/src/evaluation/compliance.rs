use std::collections::HashSet;

use serde::Serialize;

use crate::corpus::{Genre, NormalizedPoem};
use crate::prosody::{validate, RhymeBook, Strictness};

/// Automatic conformance figures for a set of poems of one genre.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub genre: Genre,
    pub count: usize,
    pub empty: bool,
    pub rhyme_only: f64,
    pub relaxed: f64,
    pub strict: f64,
    /// Mean over poems of distinct characters per character.
    pub distinct_char_ratio: f64,
    /// Mean over poems of the share of lines with the genre's length.
    pub line_length_correctness: f64,
}

/// Pass fractions counting only `Pass` verdicts. A genre without a
/// template yields zero pass fractions.
pub fn compliance_metrics(poems: &[NormalizedPoem], genre: Genre, book: &RhymeBook) -> ComplianceReport {
    let n = poems.len();
    let mut report = ComplianceReport {
        genre,
        count: n,
        empty: n == 0,
        rhyme_only: 0.0,
        relaxed: 0.0,
        strict: 0.0,
        distinct_char_ratio: 0.0,
        line_length_correctness: 0.0,
    };
    if n == 0 {
        return report;
    }
    let fraction = |level: Strictness| {
        poems
            .iter()
            .filter(|p| validate(p, genre, book, level).is_ok_and(|r| r.passed()))
            .count() as f64
            / n as f64
    };
    report.rhyme_only = fraction(Strictness::RhymeOnly);
    report.relaxed = fraction(Strictness::Relaxed);
    report.strict = fraction(Strictness::Strict);
    report.distinct_char_ratio = poems
        .iter()
        .map(|p| p.chars().collect::<HashSet<_>>().len() as f64 / p.char_count.max(1) as f64)
        .sum::<f64>()
        / n as f64;
    report.line_length_correctness = match genre.shape() {
        None => 0.0,
        Some((lines, width)) => {
            poems
                .iter()
                .map(|p| {
                    let ok = p.line_lengths.iter().take(lines).filter(|&&l| l == width).count();
                    ok as f64 / lines.max(p.lines.len()) as f64
                })
                .sum::<f64>()
                / n as f64
        }
    };
    report
}
