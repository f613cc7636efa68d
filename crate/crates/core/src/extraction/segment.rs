use std::collections::HashSet;
use std::io::BufRead;

/// Splits text into an ordered sequence of non-empty tokens whose
/// concatenation is the input.
pub trait Segmenter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<String>;
}

/// Greedy forward maximum matching against a lexicon. Characters that start
/// no lexicon word become single-character tokens.
#[derive(Debug, Clone, Default)]
pub struct MaxMatchSegmenter {
    words: HashSet<String>,
    max_len: usize,
}

impl MaxMatchSegmenter {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(Into::into)
            .map(|w| w.trim().to_string())
            .filter(|w| !w.is_empty())
            .collect();
        let max_len = words.iter().map(|w| w.chars().count()).max().unwrap_or(1);
        MaxMatchSegmenter { words, max_len }
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn load<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut words = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let w = line.trim();
            if !w.is_empty() && !w.starts_with('#') {
                words.push(w.to_string());
            }
        }
        Ok(Self::new(words))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Segmenter for MaxMatchSegmenter {
    fn segment(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let longest = (2..=self.max_len.min(chars.len() - i))
                .rev()
                .find(|&n| self.words.contains(&chars[i..i + n].iter().collect::<String>()))
                .unwrap_or(1);
            out.push(chars[i..i + longest].iter().collect());
            i += longest;
        }
        out
    }
}

/// Function words dropped before scoring.
#[derive(Debug, Clone, Default)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Stopwords {
            words: words
                .into_iter()
                .map(Into::into)
                .map(|w| w.trim().to_string())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    pub fn load<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut words = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let w = line.trim();
            if !w.is_empty() && !w.starts_with('#') {
                words.push(w.to_string());
            }
        }
        Ok(Self::new(words))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn contains_char(&self, c: char) -> bool {
        let mut buf = [0u8; 4];
        self.words.contains(&*c.encode_utf8(&mut buf))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
