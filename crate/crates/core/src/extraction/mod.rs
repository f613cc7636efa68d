//! Theme words by TF-IDF and key characters by embedding centroid.

mod embedding;
mod segment;
mod tfidf;

pub use embedding::{
    default_key_count, key_chars, key_terms, load_embeddings, EmbeddingTable, Granularity,
};
pub use segment::{MaxMatchSegmenter, Segmenter, Stopwords};
pub use tfidf::{
    build_idf, content_tokens, default_theme_count, scored_theme_words, theme_words, IdfTable,
    ScoredToken,
};

use serde::Serialize;

use crate::corpus::NormalizedPoem;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error("cannot build an idf table from an empty corpus")]
    EmptyCorpus,
    #[error("no coverage: none of the candidate terms has a vector (missing: {})", .0.join(" "))]
    NoCoverage(Vec<String>),
    #[error("malformed embedding file at line {line}: {reason}")]
    MalformedEmbedding { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Theme words and key terms of one poem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub theme_words: Vec<String>,
    pub key_chars: Vec<String>,
}

/// Everything extraction needs, bundled.
pub struct Extractor<S> {
    pub segmenter: Box<dyn Segmenter>,
    pub stopwords: Stopwords,
    pub idf: IdfTable<S>,
    pub embeddings: EmbeddingTable<S>,
    pub granularity: Granularity,
}

impl<S: Scalar> Extractor<S> {
    pub fn theme_words(&self, poem: &NormalizedPoem, k: Option<usize>) -> Vec<String> {
        theme_words(poem, &self.idf, self.segmenter.as_ref(), &self.stopwords, k)
    }

    pub fn key_terms(
        &self,
        poem: &NormalizedPoem,
        k: Option<usize>,
    ) -> Result<Vec<String>, ExtractionError> {
        key_terms(
            poem,
            &self.embeddings,
            self.segmenter.as_ref(),
            &self.stopwords,
            self.granularity,
            k,
        )
    }

    pub fn extract(
        &self,
        poem: &NormalizedPoem,
        k_theme: Option<usize>,
        k_key: Option<usize>,
    ) -> Result<Extraction, ExtractionError> {
        Ok(Extraction {
            theme_words: self.theme_words(poem, k_theme),
            key_chars: self.key_terms(poem, k_key)?,
        })
    }
}
