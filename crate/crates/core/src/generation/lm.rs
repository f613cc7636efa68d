use std::collections::HashMap;

use super::{GenerationError, PromptSpec};
use crate::scalar::Scalar;

/// Left padding for contexts shorter than the model order. Never predicted.
pub const START: char = '\u{2}';
/// Separates lines inside a poem.
pub const LINE_BREAK: char = '\n';
/// Ends a poem.
pub const END_OF_POEM: char = '\u{3}';

/// Ordered character vocabulary of a language model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocab {
    /// Deduplicates `chars`, keeping first occurrences, and adds the two
    /// markers when missing.
    pub fn new<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let mut v = Vocab::default();
        for c in chars.into_iter().chain([LINE_BREAK, END_OF_POEM]) {
            if c != START && !v.index.contains_key(&c) {
                v.index.insert(c, v.chars.len());
                v.chars.push(c);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn get(&self, i: usize) -> char {
        self.chars[i]
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn is_marker(c: char) -> bool {
        c == LINE_BREAK || c == END_OF_POEM || c == START
    }
}

/// Next-character distributions over a fixed vocabulary.
///
/// `context` is the poem generated so far, lines separated by
/// [`LINE_BREAK`]. The returned vector is aligned with
/// [`vocab`](Self::vocab), nonnegative, and sums to one.
pub trait LanguageModel<S: Scalar>: Send + Sync {
    fn name(&self) -> String;

    fn vocab(&self) -> &Vocab;

    fn next_distribution(&self, context: &[char], prompt: &PromptSpec) -> Result<Vec<S>, GenerationError>;
}

impl<S: Scalar, M: LanguageModel<S> + ?Sized> LanguageModel<S> for Box<M> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn vocab(&self) -> &Vocab {
        (**self).vocab()
    }

    fn next_distribution(&self, context: &[char], prompt: &PromptSpec) -> Result<Vec<S>, GenerationError> {
        (**self).next_distribution(context, prompt)
    }
}

/// Scales every probability to sum to one. Leaves an all-zero vector alone.
pub(crate) fn normalize<S: Scalar>(p: &mut [S]) {
    let total: S = p.iter().copied().sum();
    if total > S::zero() {
        for x in p.iter_mut() {
            *x = *x / total;
        }
    }
}
