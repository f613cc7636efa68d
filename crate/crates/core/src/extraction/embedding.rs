use std::collections::HashMap;
use std::io::BufRead;

use super::{ExtractionError, Segmenter, Stopwords};
use crate::corpus::{NormalizedPoem, GAP};
use crate::scalar::Scalar;

/// Token vectors of one fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S> {
    dim: usize,
    vectors: HashMap<String, Vec<S>>,
    duplicates: usize,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    /// Inserts a vector, replacing any earlier one. Returns false when the
    /// dimension does not match or a component is not finite.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<S>) -> bool {
        if vector.len() != self.dim || vector.iter().any(|x| !x.is_finite()) {
            return false;
        }
        if self.vectors.insert(token.into(), vector).is_some() {
            self.duplicates += 1;
        }
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Lines whose token had already been seen while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&[S]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn get_char(&self, c: char) -> Option<&[S]> {
        let mut buf = [0u8; 4];
        self.get(c.encode_utf8(&mut buf))
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Every vector multiplied by `factor`.
    pub fn scaled(&self, factor: S) -> Self {
        EmbeddingTable {
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .map(|(t, v)| (t.clone(), v.iter().map(|&x| x * factor).collect()))
                .collect(),
            duplicates: self.duplicates,
        }
    }
}

/// Reads `token v1 … vD` lines with an optional leading `V D` header.
///
/// Without a header the dimension is taken from the first vector line.
/// A later token overrides an earlier one and is counted in
/// [`EmbeddingTable::duplicates`].
pub fn load_embeddings<S: Scalar, R: BufRead>(reader: R) -> Result<EmbeddingTable<S>, ExtractionError> {
    let mut table: Option<EmbeddingTable<S>> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |reason: String| ExtractionError::MalformedEmbedding { line: line_no, reason };
        if table.is_none() && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if d == 0 {
                    return Err(malformed("dimension must be positive".into()));
                }
                table = Some(EmbeddingTable::new(d));
                continue;
            }
        }
        let dim = table.as_ref().map_or(fields.len() - 1, |t| t.dim);
        if dim == 0 {
            return Err(malformed("vector has no components".into()));
        }
        if fields.len() - 1 != dim {
            return Err(malformed(format!("expected {dim} components, found {}", fields.len() - 1)));
        }
        let vector = fields[1..]
            .iter()
            .map(|f| f.parse::<S>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<S>>>()
            .ok_or_else(|| malformed("components must be finite decimals".into()))?;
        table.get_or_insert_with(|| EmbeddingTable::new(dim)).insert(fields[0], vector);
    }
    let table = table.ok_or(ExtractionError::MalformedEmbedding {
        line: 0,
        reason: "no vectors".into(),
    })?;
    if table.duplicates > 0 {
        log::warn!("{} duplicate embedding tokens; later lines won", table.duplicates);
    }
    Ok(table)
}

/// Unit the key-term ranking operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Char,
    Word,
}

/// Default key count: one tenth of the poem length, rounded half up, at
/// least one.
pub fn default_key_count(char_count: usize) -> usize {
    ((char_count + 5) / 10).max(1)
}

fn distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<S>().sqrt()
}

/// Distinct non-stopword terms ranked by Euclidean distance to the centroid
/// of their vectors, nearest first, ties by first occurrence. Terms without
/// a vector take no part; when no term has one the missing terms are
/// returned as [`ExtractionError::NoCoverage`].
pub fn key_terms<S: Scalar>(
    poem: &NormalizedPoem,
    emb: &EmbeddingTable<S>,
    segmenter: &dyn Segmenter,
    stopwords: &Stopwords,
    granularity: Granularity,
    k: Option<usize>,
) -> Result<Vec<String>, ExtractionError> {
    let k = k.unwrap_or_else(|| default_key_count(poem.char_count));
    let terms: Vec<String> = match granularity {
        Granularity::Char => poem.chars().map(String::from).collect(),
        Granularity::Word => poem.lines.iter().flat_map(|l| segmenter.segment(l)).collect(),
    };
    let mut seen: Vec<&str> = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    let mut candidates: Vec<(&str, &[S])> = Vec::new();
    for t in &terms {
        if stopwords.contains(t) || t.contains(GAP) || seen.contains(&t.as_str()) {
            continue;
        }
        seen.push(t);
        match emb.get(t) {
            Some(v) => candidates.push((t, v)),
            None => missing.push(t.clone()),
        }
    }
    if candidates.is_empty() {
        return if missing.is_empty() {
            Ok(Vec::new())
        } else {
            Err(ExtractionError::NoCoverage(missing))
        };
    }
    let n = S::from_count(candidates.len());
    let centroid: Vec<S> = (0..emb.dim())
        .map(|d| candidates.iter().map(|(_, v)| v[d]).sum::<S>() / n)
        .collect();
    let mut ranked: Vec<(S, &str)> = candidates
        .iter()
        .map(|&(t, v)| (distance(v, &centroid), t))
        .collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(ranked.into_iter().take(k).map(|(_, t)| t.to_string()).collect())
}

/// Character-level key extraction.
pub fn key_chars<S: Scalar>(
    poem: &NormalizedPoem,
    emb: &EmbeddingTable<S>,
    stopwords: &Stopwords,
    k: Option<usize>,
) -> Result<Vec<char>, ExtractionError> {
    let seg = super::MaxMatchSegmenter::default();
    Ok(key_terms(poem, emb, &seg, stopwords, Granularity::Char, k)?
        .into_iter()
        .filter_map(|t| t.chars().next())
        .collect())
}
