//! Per-label token frequencies for word-cloud style summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{clean_text, tokenize, LabeledCorpus, StopWords, LABEL_NAMES, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopwordMode {
    Apply,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableLabel {
    Class(u8),
    All,
}

impl TableLabel {
    pub fn name(self) -> &'static str {
        match self {
            TableLabel::Class(c) => LABEL_NAMES[c as usize],
            TableLabel::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub label: TableLabel,
    counts: BTreeMap<String, u64>,
    total_tokens: u64,
}

impl FrequencyTable {
    pub fn new(label: TableLabel) -> Self {
        Self {
            label,
            counts: BTreeMap::new(),
            total_tokens: 0,
        }
    }

    pub fn add(&mut self, token: &str) {
        *self.counts.entry(token.to_owned()).or_insert(0) += 1;
        self.total_tokens += 1;
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// The `k` most frequent tokens, count descending then token ascending.
    pub fn top_k(&self, k: usize) -> Vec<(String, u64)> {
        let mut ranked: Vec<(&String, &u64)> = self.counts.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        ranked
            .into_iter()
            .take(k)
            .map(|(t, &c)| (t.clone(), c))
            .collect()
    }

    /// Ranked export; `k = None` keeps every token.
    pub fn to_document(&self, k: Option<usize>) -> FrequencyDocument {
        let entries = self
            .top_k(k.unwrap_or(usize::MAX))
            .into_iter()
            .map(|(token, count)| FrequencyEntry {
                frequency: if self.total_tokens == 0 {
                    0.0
                } else {
                    count as f64 / self.total_tokens as f64
                },
                token,
                count,
            })
            .collect();
        FrequencyDocument {
            label_name: self.label.name().to_owned(),
            total_tokens: self.total_tokens,
            entries,
        }
    }
}

pub fn top_k(table: &FrequencyTable, k: usize) -> Vec<(String, u64)> {
    table.top_k(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub token: String,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDocument {
    pub label_name: String,
    pub total_tokens: u64,
    pub entries: Vec<FrequencyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFrequencies {
    /// Indexed by class code.
    pub per_label: Vec<FrequencyTable>,
    pub combined: FrequencyTable,
}

impl LabelFrequencies {
    /// Per-label documents in class order, then the combined one.
    pub fn documents(&self, k: Option<usize>) -> Vec<FrequencyDocument> {
        self.per_label
            .iter()
            .chain(std::iter::once(&self.combined))
            .map(|t| t.to_document(k))
            .collect()
    }
}

/// Cleans and tokenizes every record, optionally drops stopwords, and counts
/// tokens per label and overall.
pub fn frequency_by_label(
    corpus: &LabeledCorpus,
    stopwords: &StopWords,
    mode: StopwordMode,
) -> LabelFrequencies {
    let mut per_label: Vec<FrequencyTable> = (0..NUM_CLASSES as u8)
        .map(|c| FrequencyTable::new(TableLabel::Class(c)))
        .collect();
    let mut combined = FrequencyTable::new(TableLabel::All);
    for record in &corpus.records {
        for token in tokenize(&clean_text(&record.text)) {
            if mode == StopwordMode::Apply && stopwords.contains(&token) {
                continue;
            }
            per_label[record.label as usize].add(&token);
            combined.add(&token);
        }
    }
    LabelFrequencies {
        per_label,
        combined,
    }
}
