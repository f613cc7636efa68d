//! Data files compiled into the crate.
//!
//! The rhyme book covers the level-tone groups of the Pingshui system and
//! assigns oblique readings to their traditional groups where known.
//! The corpus and character vectors are synthetic fixtures regenerated by
//! the `make_fixtures` example; they exist to exercise the pipeline, not to
//! model real poetry.

use crate::corpus::{normalize, parse_corpus, NormalizedPoem};
use crate::extraction::{build_idf, load_embeddings, EmbeddingTable, Extractor, Granularity, MaxMatchSegmenter, Stopwords};
use crate::prosody::RhymeBook;
use crate::scalar::Scalar;

pub const RHYME_BOOK_TSV: &str = include_str!("../data/rhyme_book.tsv");
pub const LEXICON: &str = include_str!("../data/lexicon.txt");
pub const STOPWORDS: &str = include_str!("../data/stopwords.txt");
pub const CORPUS_CSV: &str = include_str!("../data/corpus_fixture.csv");
pub const CHAR_VECTORS: &str = include_str!("../data/char_vectors.txt");
pub const CLASSICS: &str = include_str!("../data/classics.txt");

pub fn rhyme_book() -> RhymeBook {
    RhymeBook::from_tsv(RHYME_BOOK_TSV, "pingshui").expect("bundled rhyme book parses")
}

pub fn segmenter() -> MaxMatchSegmenter {
    MaxMatchSegmenter::new(LEXICON.lines())
}

pub fn stopwords() -> Stopwords {
    Stopwords::new(STOPWORDS.lines())
}

/// The fixture corpus, normalized.
pub fn corpus() -> Vec<NormalizedPoem> {
    let parsed = parse_corpus(CORPUS_CSV.as_bytes(), "corpus_fixture.csv").expect("bundled corpus parses");
    parsed.records.iter().filter_map(|r| normalize(r).ok()).collect()
}

pub fn embeddings<S: Scalar>() -> EmbeddingTable<S> {
    load_embeddings(CHAR_VECTORS.as_bytes()).expect("bundled vectors parse")
}

/// Extractor over the fixture corpus with the bundled lexicon, stopwords
/// and vectors.
pub fn extractor<S: Scalar>() -> Extractor<S> {
    let segmenter = segmenter();
    let stopwords = stopwords();
    let idf = build_idf(&corpus(), &segmenter, &stopwords).expect("non-empty corpus");
    Extractor {
        segmenter: Box::new(segmenter),
        stopwords,
        idf,
        embeddings: embeddings(),
        granularity: Granularity::Char,
    }
}
