use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::binomial_pvalue;
use super::EvaluationError;
use crate::corpus::{Genre, NormalizedPoem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

/// One forced-choice question: which of two poems sharing a first line was
/// written by the machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuringItem {
    pub item_id: String,
    pub genre: Genre,
    pub shared_first_line: String,
    pub option_a: String,
    pub option_b: String,
}

/// Item id → the option holding the machine poem. Kept apart from the
/// questionnaire so the latter can be handed out blind.
pub type AnswerKey = BTreeMap<String, Choice>;

/// Builds the questionnaire from `(human, machine)` pairs, placing the
/// machine poem at A or B by a seeded coin flip.
pub fn build_turing_set(
    pairs: &[(NormalizedPoem, NormalizedPoem)],
    seed: u64,
) -> Result<(Vec<TuringItem>, AnswerKey), EvaluationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = pairs.len().max(1).to_string().len().max(2);
    let mut items = Vec::with_capacity(pairs.len());
    let mut key = AnswerKey::new();
    for (i, (human, machine)) in pairs.iter().enumerate() {
        let mismatch = |reason: &str| EvaluationError::PairMismatch {
            index: i,
            reason: reason.to_string(),
        };
        if human.genre() != machine.genre() {
            return Err(mismatch("genres differ"));
        }
        if human.lines.first() != machine.lines.first() {
            return Err(mismatch("first lines differ"));
        }
        if human.text() == machine.text() {
            return Err(mismatch("the two poems are identical"));
        }
        let item_id = format!("q{:0width$}", i + 1);
        let machine_at = if rng.random_bool(0.5) { Choice::A } else { Choice::B };
        let (a, b) = match machine_at {
            Choice::A => (machine, human),
            Choice::B => (human, machine),
        };
        items.push(TuringItem {
            item_id: item_id.clone(),
            genre: human.genre(),
            shared_first_line: human.lines[0].clone(),
            option_a: a.display(),
            option_b: b.display(),
        });
        key.insert(item_id, machine_at);
    }
    Ok((items, key))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Answer {
    A,
    B,
    Skip,
}

/// One respondent's answers in the order given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSheet {
    pub respondent_id: String,
    pub choices: Vec<(String, Answer)>,
}

/// Parses `respondent_id,item_id,choice` rows (header required). Choices
/// are `A`, `B`, or `skip`/empty. Rows of one respondent form one sheet;
/// a second answer to the same item is an error.
pub fn parse_responses<R: Read>(reader: R) -> Result<Vec<ResponseSheet>, EvaluationError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut sheets: Vec<ResponseSheet> = Vec::new();
    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| EvaluationError::Responses { line, reason: e.to_string() })?;
        if row.len() != 3 {
            return Err(EvaluationError::Responses {
                line,
                reason: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let answer = match row[2].to_ascii_lowercase().as_str() {
            "a" => Answer::A,
            "b" => Answer::B,
            "" | "skip" | "-" => Answer::Skip,
            other => {
                return Err(EvaluationError::Responses {
                    line,
                    reason: format!("choice must be A, B or skip, got {other:?}"),
                })
            }
        };
        let idx = *by_id.entry(row[0].to_string()).or_insert_with(|| {
            sheets.push(ResponseSheet {
                respondent_id: row[0].to_string(),
                choices: Vec::new(),
            });
            sheets.len() - 1
        });
        let sheet = &mut sheets[idx];
        if sheet.choices.iter().any(|(item, _)| item == &row[1]) {
            return Err(EvaluationError::Responses {
                line,
                reason: format!("respondent {} answered {} twice", &row[0], &row[1]),
            });
        }
        sheet.choices.push((row[1].to_string(), answer));
    }
    Ok(sheets)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemScore {
    pub item_id: String,
    pub correct: u64,
    pub choices: u64,
    pub accuracy: Option<f64>,
    /// Accuracy below 0.4 or above 0.6.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedSheet {
    pub respondent_id: String,
    pub unknown_items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub items: Vec<ItemScore>,
    pub correct: u64,
    pub choices: u64,
    /// Rounded to four decimal places; `None` without any choice.
    pub accuracy: Option<f64>,
    pub accuracy_undefined: bool,
    /// Two-sided binomial test against chance.
    pub p_value: Option<f64>,
    pub sheets_scored: usize,
    pub rejected: Vec<RejectedSheet>,
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Counts a choice as correct when it names the machine option. Skips are
/// left out of every denominator; sheets naming unknown items are dropped
/// whole and listed in [`ScoreReport::rejected`].
pub fn score_responses(key: &AnswerKey, sheets: &[ResponseSheet]) -> ScoreReport {
    let mut per_item: BTreeMap<&str, (u64, u64)> = key.keys().map(|k| (k.as_str(), (0, 0))).collect();
    let mut rejected = Vec::new();
    let mut scored = 0;
    for sheet in sheets {
        let unknown: Vec<String> = sheet
            .choices
            .iter()
            .filter(|(item, _)| !key.contains_key(item))
            .map(|(item, _)| item.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        if !unknown.is_empty() {
            let mut unknown = unknown;
            unknown.sort();
            rejected.push(RejectedSheet {
                respondent_id: sheet.respondent_id.clone(),
                unknown_items: unknown,
            });
            continue;
        }
        scored += 1;
        for (item, answer) in &sheet.choices {
            let truth = key[item];
            let hit = match answer {
                Answer::Skip => continue,
                Answer::A => truth == Choice::A,
                Answer::B => truth == Choice::B,
            };
            let slot = per_item.get_mut(item.as_str()).expect("known item");
            slot.1 += 1;
            if hit {
                slot.0 += 1;
            }
        }
    }
    let items: Vec<ItemScore> = per_item
        .into_iter()
        .map(|(id, (correct, choices))| {
            let accuracy = (choices > 0).then(|| round4(correct as f64 / choices as f64));
            ItemScore {
                item_id: id.to_string(),
                correct,
                choices,
                accuracy,
                flagged: accuracy.is_some_and(|a| !(0.4..=0.6).contains(&a)),
            }
        })
        .collect();
    let correct = items.iter().map(|i| i.correct).sum();
    let choices = items.iter().map(|i| i.choices).sum();
    let accuracy = (choices > 0).then(|| round4(correct as f64 / choices as f64));
    ScoreReport {
        items,
        correct,
        choices,
        accuracy,
        accuracy_undefined: accuracy.is_none(),
        p_value: binomial_pvalue(choices, correct, 0.5).ok(),
        sheets_scored: scored,
        rejected,
    }
}
