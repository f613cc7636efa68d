use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{ExtractionError, Segmenter, Stopwords};
use crate::corpus::{NormalizedPoem, GAP};
use crate::scalar::Scalar;

/// Document frequencies over a corpus where one poem is one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable<S> {
    doc_count: usize,
    df: HashMap<String, usize>,
    #[serde(skip)]
    _scalar: std::marker::PhantomData<S>,
}

impl<S: Scalar> IdfTable<S> {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Number of documents containing `token`; zero when unseen.
    pub fn df(&self, token: &str) -> usize {
        self.df.get(token).copied().unwrap_or(0)
    }

    /// `ln((1+N)/(1+df)) + 1`.
    pub fn idf(&self, token: &str) -> S {
        let n = S::from_count(self.doc_count);
        let df = S::from_count(self.df(token));
        ((S::one() + n) / (S::one() + df)).ln() + S::one()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = (&str, usize)> {
        self.df.iter().map(|(t, &d)| (t.as_str(), d))
    }
}

/// Content tokens of a poem in reading order: segmented per line, with
/// stopwords and gap markers dropped.
pub fn content_tokens(
    poem: &NormalizedPoem,
    segmenter: &dyn Segmenter,
    stopwords: &Stopwords,
) -> Vec<String> {
    poem.lines
        .iter()
        .flat_map(|line| segmenter.segment(line))
        .filter(|t| !stopwords.contains(t) && !t.contains(GAP))
        .collect()
}

pub fn build_idf<S: Scalar>(
    corpus: &[NormalizedPoem],
    segmenter: &dyn Segmenter,
    stopwords: &Stopwords,
) -> Result<IdfTable<S>, ExtractionError> {
    if corpus.is_empty() {
        return Err(ExtractionError::EmptyCorpus);
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for poem in corpus {
        let distinct: HashSet<String> = content_tokens(poem, segmenter, stopwords).into_iter().collect();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    Ok(IdfTable {
        doc_count: corpus.len(),
        df,
        _scalar: std::marker::PhantomData,
    })
}

/// Default theme word count: one twelfth of the poem length, rounded half
/// up, at least one.
pub fn default_theme_count(char_count: usize) -> usize {
    ((char_count + 6) / 12).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredToken<S> {
    pub token: String,
    pub score: S,
}

/// Tokens ranked by raw in-poem count times idf, ties broken by first
/// occurrence.
pub fn scored_theme_words<S: Scalar>(
    poem: &NormalizedPoem,
    idf: &IdfTable<S>,
    segmenter: &dyn Segmenter,
    stopwords: &Stopwords,
    k: Option<usize>,
) -> Vec<ScoredToken<S>> {
    let k = k.unwrap_or_else(|| default_theme_count(poem.char_count));
    let mut order: Vec<String> = Vec::new();
    let mut tf: HashMap<String, usize> = HashMap::new();
    for t in content_tokens(poem, segmenter, stopwords) {
        let n = tf.entry(t.clone()).or_insert(0);
        if *n == 0 {
            order.push(t);
        }
        *n += 1;
    }
    let mut scored: Vec<ScoredToken<S>> = order
        .into_iter()
        .map(|t| {
            let score = S::from_count(tf[&t]) * idf.idf(&t);
            ScoredToken { token: t, score }
        })
        .collect();
    // stable sort keeps first-occurrence order among equal scores
    scored.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal));
    scored.truncate(k);
    scored
}

pub fn theme_words<S: Scalar>(
    poem: &NormalizedPoem,
    idf: &IdfTable<S>,
    segmenter: &dyn Segmenter,
    stopwords: &Stopwords,
    k: Option<usize>,
) -> Vec<String> {
    scored_theme_words(poem, idf, segmenter, stopwords, k)
        .into_iter()
        .map(|s| s.token)
        .collect()
}
