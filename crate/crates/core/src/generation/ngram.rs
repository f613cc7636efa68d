use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::lm::{normalize, LanguageModel, Vocab, END_OF_POEM, LINE_BREAK, START};
use super::{GenerationError, PromptSpec};
use crate::corpus::NormalizedPoem;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
struct Followers {
    total: u64,
    next: Vec<(usize, u64)>,
}

/// Character n-gram model with Witten-Bell style interpolation.
///
/// For a history `h` seen in training,
/// `p(w|h) = (c(h,w) + κ·T(h)·p(w|h')) / (c(h) + κ·T(h))` where `T(h)` is
/// the number of distinct followers of `h` and `h'` drops the oldest
/// character. Unseen histories fall back to `p(w|h')` unchanged. The
/// unigram level is the maximum-likelihood estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel<S> {
    order: usize,
    kappa: S,
    vocab: Vocab,
    unigram_counts: Vec<u64>,
    unigram: Vec<S>,
    /// `tables[k]` holds histories of length `k + 1`.
    tables: Vec<HashMap<Vec<char>, Followers>>,
}

/// The token stream a poem contributes: its lines separated by
/// [`LINE_BREAK`] and closed by [`END_OF_POEM`].
pub fn poem_tokens(poem: &NormalizedPoem) -> Vec<char> {
    let mut out = Vec::with_capacity(poem.char_count + poem.lines.len());
    for (i, line) in poem.lines.iter().enumerate() {
        if i > 0 {
            out.push(LINE_BREAK);
        }
        out.extend(line.chars());
    }
    out.push(END_OF_POEM);
    out
}

/// Counts n-grams of every order up to `order`. Poems with gap markers are
/// skipped. Deterministic in corpus order.
pub fn train_ngram<S: Scalar>(corpus: &[NormalizedPoem], order: usize) -> Result<NGramModel<S>, GenerationError> {
    if order < 1 {
        return Err(GenerationError::InvalidOrder(order));
    }
    let streams: Vec<Vec<char>> = corpus.iter().filter(|p| !p.has_gaps).map(poem_tokens).collect();
    if streams.is_empty() {
        return Err(GenerationError::EmptyCorpus);
    }
    let mut first_seen: Vec<char> = Vec::new();
    let mut uni: HashMap<char, u64> = HashMap::new();
    let mut raw: Vec<HashMap<Vec<char>, BTreeMap<char, u64>>> = vec![HashMap::new(); order - 1];
    for stream in &streams {
        let mut padded = vec![START; order - 1];
        padded.extend(stream);
        for i in order - 1..padded.len() {
            let w = padded[i];
            let n = uni.entry(w).or_insert(0);
            if *n == 0 {
                first_seen.push(w);
            }
            *n += 1;
            for (k, table) in raw.iter_mut().enumerate() {
                let h = padded[i - k - 1..i].to_vec();
                *table.entry(h).or_default().entry(w).or_insert(0) += 1;
            }
        }
    }
    first_seen.sort_unstable();
    let vocab = Vocab::new(first_seen);
    let unigram_counts: Vec<u64> = vocab.chars().iter().map(|c| uni.get(c).copied().unwrap_or(0)).collect();
    Ok(NGramModel::assemble(order, S::one(), vocab, unigram_counts, raw))
}

impl<S: Scalar> NGramModel<S> {
    fn assemble(
        order: usize,
        kappa: S,
        vocab: Vocab,
        unigram_counts: Vec<u64>,
        raw: Vec<HashMap<Vec<char>, BTreeMap<char, u64>>>,
    ) -> Self {
        let total: u64 = unigram_counts.iter().sum();
        let unigram = unigram_counts
            .iter()
            .map(|&c| S::from_count(c as usize) / S::from_count(total.max(1) as usize))
            .collect();
        let tables = raw
            .into_iter()
            .map(|table| {
                table
                    .into_iter()
                    .map(|(h, next)| {
                        let next: Vec<(usize, u64)> = next
                            .into_iter()
                            .filter_map(|(c, n)| vocab.index_of(c).map(|i| (i, n)))
                            .collect();
                        let total = next.iter().map(|&(_, n)| n).sum();
                        (h, Followers { total, next })
                    })
                    .collect()
            })
            .collect();
        NGramModel {
            order,
            kappa,
            vocab,
            unigram_counts,
            unigram,
            tables,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kappa(&self) -> S {
        self.kappa
    }

    /// Weight of the lower-order estimate; larger values smooth more.
    pub fn with_kappa(mut self, kappa: S) -> Self {
        self.kappa = kappa;
        self
    }

    /// Training count of `c` as a predicted token.
    pub fn count(&self, c: char) -> u64 {
        self.vocab.index_of(c).map_or(0, |i| self.unigram_counts[i])
    }

    /// Distribution after the history formed by the last `order - 1`
    /// characters of the left-padded context.
    pub fn distribution(&self, context: &[char]) -> Vec<S> {
        let mut p = self.unigram.clone();
        let need = self.order - 1;
        let mut history: Vec<char> = vec![START; need.saturating_sub(context.len())];
        history.extend(&context[context.len().saturating_sub(need)..]);
        for (k, table) in self.tables.iter().enumerate() {
            let h = &history[history.len() - k - 1..];
            let Some(f) = table.get(h) else { continue };
            let t = S::from_count(f.next.len()) * self.kappa;
            let denom = S::from_count(f.total as usize) + t;
            let lambda = t / denom;
            for x in p.iter_mut() {
                *x = *x * lambda;
            }
            for &(i, n) in &f.next {
                p[i] = p[i] + S::from_count(n as usize) / denom;
            }
        }
        normalize(&mut p);
        p
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<(), GenerationError> {
        let stored = Stored {
            order: self.order,
            kappa: self.kappa.to_f64_lossy(),
            vocab: self.vocab.chars().iter().collect(),
            unigram: self.unigram_counts.clone(),
            contexts: self
                .tables
                .iter()
                .map(|t| {
                    t.iter()
                        .map(|(h, f)| {
                            let next = f.next.iter().map(|&(i, n)| (self.vocab.get(i), n)).collect();
                            (h.iter().collect::<String>(), next)
                        })
                        .collect()
                })
                .collect(),
        };
        serde_json::to_writer(writer, &stored).map_err(|e| GenerationError::Model(e.to_string()))
    }

    pub fn load<R: Read>(reader: R) -> Result<Self, GenerationError> {
        let stored: Stored = serde_json::from_reader(reader).map_err(|e| GenerationError::Model(e.to_string()))?;
        if stored.order < 1 || stored.contexts.len() != stored.order - 1 {
            return Err(GenerationError::Model("context tables do not match the order".into()));
        }
        let vocab = Vocab::new(stored.vocab.chars());
        if vocab.len() != stored.unigram.len() {
            return Err(GenerationError::Model("unigram counts do not match the vocabulary".into()));
        }
        let raw = stored
            .contexts
            .into_iter()
            .map(|t| {
                t.into_iter()
                    .map(|(h, next)| (h.chars().collect::<Vec<char>>(), next))
                    .collect()
            })
            .collect();
        Ok(Self::assemble(stored.order, S::lit(stored.kappa), vocab, stored.unigram, raw))
    }
}

#[derive(Serialize, Deserialize)]
struct Stored {
    order: usize,
    kappa: f64,
    vocab: String,
    unigram: Vec<u64>,
    contexts: Vec<BTreeMap<String, BTreeMap<char, u64>>>,
}

impl<S: Scalar> LanguageModel<S> for NGramModel<S> {
    fn name(&self) -> String {
        format!("ngram-{}", self.order)
    }

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_distribution(&self, context: &[char], _prompt: &PromptSpec) -> Result<Vec<S>, GenerationError> {
        Ok(self.distribution(context))
    }
}
