use std::collections::HashSet;
use std::path::Path;

use super::CorpusError;

/// The shipped stopword list, one token per line.
pub const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Lowercases ASCII letters, deletes non-ASCII letters, turns every other
/// character (digits, punctuation, symbols, whitespace) into a separator,
/// and collapses separators to single spaces with no padding at either end.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        if ch.is_ascii_alphabetic() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch.to_ascii_lowercase());
        } else if !ch.is_alphabetic() {
            pending_space = true;
        }
    }
    out
}

/// Splits cleaned text on spaces, dropping empty pieces.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Order-preserving removal of every stoplisted token.
pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopWords) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stoplist.contains(t))
        .collect()
}

/// clean → tokenize → stopword filter.
pub fn preprocess(raw: &str, stoplist: &StopWords) -> Vec<String> {
    remove_stopwords(tokenize(&clean_text(raw)), stoplist)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self {
            words: HashSet::new(),
        }
    }

    /// One token per line; blank lines and `#` comments are ignored. Entries
    /// are passed through [`clean_text`], so `Don't` contributes `don` and `t`.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .flat_map(|l| tokenize(&clean_text(l)))
            .collect();
        Self { words }
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Sorted entries.
    pub fn to_sorted_vec(&self) -> Vec<String> {
        let mut v: Vec<String> = self.words.iter().cloned().collect();
        v.sort();
        v
    }
}
