//! Labeled text ingestion, cleaning, tokenization, vocabulary and encoding.

mod split;
mod synthetic;
mod text;
mod vocab;

use std::fs::File;
use std::io::Read;
use std::path::Path;

pub use split::{split, split_indices};
pub use synthetic::{synthetic_corpus, CLASS_KEYWORDS, FILLER_WORDS};
pub use text::{clean_text, preprocess, remove_stopwords, tokenize, StopWords, BUILTIN_STOPWORDS};
pub use vocab::{encode, EncodedSequence, Vocabulary, DEFAULT_VOCAB_SIZE, OOV_ID, PAD_ID};

/// Number of emotion classes.
pub const NUM_CLASSES: usize = 6;

/// Class names indexed by label code.
pub const LABEL_NAMES: [&str; NUM_CLASSES] =
    ["sadness", "joy", "love", "anger", "fear", "surprise"];

/// Default fixed sequence length.
pub const DEFAULT_SEQ_LEN: usize = 79;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row {row}: {detail}")]
    MalformedRow { row: u64, detail: String },
    #[error("label {label} out of range at row {row}")]
    LabelOutOfRange { row: u64, label: i64 },
    #[error("vocabulary size must be at least 3, got {0}")]
    VocabTooSmall(usize),
    #[error("malformed vocabulary line {line}: {detail}")]
    MalformedVocabulary { line: usize, detail: String },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("need at least 2 records to split, got {0}")]
    TooFewRecords(usize),
    #[error("sequence length must be at least 1")]
    InvalidSeqLen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRecord {
    pub text: String,
    pub label: u8,
}

impl LabeledRecord {
    /// Panics if `label` is not a valid class code.
    pub fn new(text: impl Into<String>, label: u8) -> Self {
        assert!((label as usize) < NUM_CLASSES, "label {label} out of range");
        Self {
            text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub records: Vec<LabeledRecord>,
}

impl LabeledCorpus {
    pub fn new(records: Vec<LabeledRecord>) -> Self {
        Self { records }
    }

    pub fn label_names(&self) -> &'static [&'static str; NUM_CLASSES] {
        &LABEL_NAMES
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Token lists after [`preprocess`], one per record.
    pub fn tokenized(&self, stopwords: &StopWords) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| preprocess(&r.text, stopwords))
            .collect()
    }

    /// Preprocesses and encodes every record against `vocab`.
    pub fn encode(
        &self,
        vocab: &Vocabulary,
        stopwords: &StopWords,
        seq_len: usize,
    ) -> Result<Vec<EncodedSequence>, CorpusError> {
        self.records
            .iter()
            .map(|r| {
                Ok(EncodedSequence {
                    ids: encode(&preprocess(&r.text, stopwords), vocab, seq_len)?,
                    label: r.label,
                })
            })
            .collect()
    }

    /// Seeded shuffle-and-cut into (train, test); see [`split_indices`].
    pub fn split(
        &self,
        train_fraction: f64,
        seed: u64,
        stratify: bool,
    ) -> Result<(LabeledCorpus, LabeledCorpus), CorpusError> {
        let labels = stratify.then(|| self.labels());
        let (train, test) = split_indices(self.len(), labels.as_deref(), train_fraction, seed)?;
        let pick = |idx: Vec<usize>| {
            LabeledCorpus::new(idx.into_iter().map(|i| self.records[i].clone()).collect())
        };
        Ok((pick(train), pick(test)))
    }
}

/// How the first row of a delimited file is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// A first row whose label field is literally `label` is a header.
    #[default]
    Auto,
    Present,
    Absent,
}

/// Delimited text with a text column followed by an integer label column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelimitedFormat {
    pub delimiter: u8,
    pub header: HeaderMode,
}

impl Default for DelimitedFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            header: HeaderMode::Auto,
        }
    }
}

pub fn load_dataset(path: &Path, format: &DelimitedFormat) -> Result<LabeledCorpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file, format)
}

/// Parses `text<delim>label` rows. Row numbers in errors are 1-based lines.
pub fn read_dataset<R: Read>(
    reader: R,
    format: &DelimitedFormat,
) -> Result<LabeledCorpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(format.delimiter)
        .from_reader(reader);
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CorpusError::MalformedRow {
            row: e.position().map_or(i as u64 + 1, |p| p.line()),
            detail: e.to_string(),
        })?;
        let line = row.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 {
            let is_header = match format.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => row
                    .get(1)
                    .is_some_and(|f| f.trim().eq_ignore_ascii_case("label")),
            };
            if is_header {
                continue;
            }
        }
        if row.len() != 2 {
            return Err(CorpusError::MalformedRow {
                row: line,
                detail: format!("expected 2 fields (text, label), found {}", row.len()),
            });
        }
        let raw_label = row[1].trim();
        let label: i64 = raw_label.parse().map_err(|_| CorpusError::MalformedRow {
            row: line,
            detail: format!("label {raw_label:?} is not an integer"),
        })?;
        if !(0..NUM_CLASSES as i64).contains(&label) {
            return Err(CorpusError::LabelOutOfRange { row: line, label });
        }
        records.push(LabeledRecord {
            text: row[0].to_string(),
            label: label as u8,
        });
    }
    Ok(LabeledCorpus::new(records))
}
