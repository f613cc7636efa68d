//! Shared, read-only pipeline resources built from a [`Config`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use guiyun::assets;
use guiyun::corpus::{deduplicate, normalize, parse_corpus, NormalizedPoem};
use guiyun::extraction::{build_idf, load_embeddings, Granularity, MaxMatchSegmenter, Stopwords};
use guiyun::generation::{train_ngram, LanguageModel, NGramModel, ProcessModel, StyleLexicon, Vocab};
use guiyun::prosody::RhymeBook;
use guiyun::ExtractorF64;

use crate::config::Config;

#[derive(Debug, thiserror::Error)]
pub enum ResourceError {
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Load { path: PathBuf, source: guiyun::Error },
    #[error("{0}")]
    Core(#[from] guiyun::Error),
    #[error("lm_command is empty")]
    EmptyCommand,
}

pub type Model = Box<dyn LanguageModel<f64>>;

pub struct Resources {
    pub book: RhymeBook,
    pub corpus: Vec<NormalizedPoem>,
    pub extractor: ExtractorF64,
    pub lm: Model,
    pub styles: BTreeMap<String, StyleLexicon>,
}

fn open(path: &Path) -> Result<BufReader<File>, ResourceError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| ResourceError::Open {
            path: path.to_path_buf(),
            source,
        })
}

fn loaded<T, E: Into<guiyun::Error>>(path: &Path, r: Result<T, E>) -> Result<T, ResourceError> {
    r.map_err(|e| ResourceError::Load {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

/// Reads a four-field CSV corpus, dropping duplicates and rows that do not
/// normalize.
pub fn load_corpus(path: &Path) -> Result<Vec<NormalizedPoem>, ResourceError> {
    let parsed = loaded(path, parse_corpus(open(path)?, &path.display().to_string()))?;
    Ok(deduplicate(parsed.records)
        .iter()
        .filter_map(|r| normalize(r).ok())
        .collect())
}

pub fn load_book(path: &Path) -> Result<RhymeBook, ResourceError> {
    let name = path.file_stem().map_or("book".into(), |s| s.to_string_lossy());
    loaded(path, RhymeBook::load(open(path)?, &name))
}

pub fn load_style(path: &Path) -> Result<StyleLexicon, ResourceError> {
    loaded(path, StyleLexicon::load(open(path)?))
}

impl Resources {
    /// Bundled data with a trigram model trained on the fixture corpus.
    pub fn bundled() -> Self {
        let corpus = assets::corpus();
        Resources {
            book: assets::rhyme_book(),
            extractor: assets::extractor(),
            lm: Box::new(train_ngram::<f64>(&corpus, 3).expect("fixture corpus trains")),
            corpus,
            styles: BTreeMap::new(),
        }
    }

    pub fn load(config: &Config) -> Result<Self, ResourceError> {
        let corpus = corpus(config)?;
        let mut styles = BTreeMap::new();
        for (name, path) in &config.styles {
            styles.insert(name.clone(), load_style(path)?);
        }
        Ok(Resources {
            book: book(config)?,
            extractor: extractor(config, &corpus)?,
            lm: language_model(config, &corpus)?,
            corpus,
            styles,
        })
    }
}

pub fn book(config: &Config) -> Result<RhymeBook, ResourceError> {
    match &config.rhyme_book {
        Some(p) => load_book(p),
        None => Ok(assets::rhyme_book()),
    }
}

pub fn corpus(config: &Config) -> Result<Vec<NormalizedPoem>, ResourceError> {
    match &config.corpus {
        Some(p) => load_corpus(p),
        None => Ok(assets::corpus()),
    }
}

/// Extractor with idf statistics drawn from `corpus`.
pub fn extractor(config: &Config, corpus: &[NormalizedPoem]) -> Result<ExtractorF64, ResourceError> {
    let segmenter = match &config.lexicon {
        Some(p) => MaxMatchSegmenter::load(open(p)?).map_err(|source| ResourceError::Open {
            path: p.clone(),
            source,
        })?,
        None => assets::segmenter(),
    };
    let stopwords = match &config.stopwords {
        Some(p) => Stopwords::load(open(p)?).map_err(|source| ResourceError::Open {
            path: p.clone(),
            source,
        })?,
        None => assets::stopwords(),
    };
    let embeddings = match &config.embeddings {
        Some(p) => loaded(p, load_embeddings(open(p)?))?,
        None => assets::embeddings(),
    };
    let idf = build_idf(corpus, &segmenter, &stopwords).map_err(guiyun::Error::from)?;
    Ok(ExtractorF64 {
        segmenter: Box::new(segmenter),
        stopwords,
        idf,
        embeddings,
        granularity: Granularity::Char,
    })
}

/// The external model process if configured, else the saved n-gram model,
/// else an n-gram model trained on `corpus`.
pub fn language_model(config: &Config, corpus: &[NormalizedPoem]) -> Result<Model, ResourceError> {
    if let Some(command) = &config.lm_command {
        let mut parts = command.split_whitespace().map(String::from);
        let program = parts.next().ok_or(ResourceError::EmptyCommand)?;
        let args: Vec<String> = parts.collect();
        let vocab = Vocab::new(corpus.iter().flat_map(|p| p.chars()));
        Ok(Box::new(ProcessModel::spawn(&program, &args, vocab).map_err(guiyun::Error::from)?))
    } else if let Some(p) = &config.lm {
        Ok(Box::new(loaded(p, NGramModel::<f64>::load(open(p)?))?))
    } else {
        Ok(Box::new(train_ngram::<f64>(corpus, config.lm_order).map_err(guiyun::Error::from)?))
    }
}
