//! Command-line front end: corpus statistics, preprocessing, training,
//! evaluation, prediction and model summaries.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use sentigru::corpus::{
    load_dataset, DelimitedFormat, EncodedSequence, LabeledCorpus, StopWords, Vocabulary,
};
use sentigru::metrics::{evaluate_predictions, history_report, EvalReport};
use sentigru::model::{read_precision, Classifier, Model, Prediction, Summary};
use sentigru::numerics::{Dtype, Scalar};
use sentigru::trainer::{evaluate, fit_with, EpochRecord};
use sentigru::wordstats::{frequency_by_label, StopwordMode};
use serde::Serialize;

pub use config::{Options, Precision, RunConfig, Units};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sentigru",
    version,
    about = "Bidirectional-GRU emotion classifier"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export per-label word frequencies as JSON
    Stats {
        #[command(flatten)]
        opts: Options,
        /// Keep only the most frequent tokens of each label
        #[arg(long)]
        top_k: Option<usize>,
        /// Count stopwords instead of removing them
        #[arg(long)]
        keep_stopwords: bool,
    },
    /// Emit the encoded corpus as JSON
    Preprocess {
        #[command(flatten)]
        opts: Options,
    },
    /// Train a model and write it with its history and validation report
    Train {
        #[command(flatten)]
        opts: Options,
    },
    /// Score a saved model on a labeled dataset
    Evaluate {
        #[command(flatten)]
        opts: Options,
    },
    /// Classify raw texts with a saved model
    Predict {
        #[command(flatten)]
        opts: Options,
        /// Text to classify; repeat for several
        #[arg(long, required = true)]
        text: Vec<String>,
    },
    /// Print the layer table of a configuration or saved model
    Summary {
        #[command(flatten)]
        opts: Options,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(
        argv,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

/// [`run`] with explicit output and error streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Stats {
            opts,
            top_k,
            keep_stopwords,
        } => stats(&opts.resolve()?, top_k, keep_stopwords, out),
        Command::Preprocess { opts } => preprocess(&opts.resolve()?, out),
        Command::Train { opts } => train(&opts.resolve()?, out, err),
        Command::Evaluate { opts } => evaluate_cmd(&opts.resolve()?, out),
        Command::Predict { opts, text } => predict_cmd(&opts.resolve()?, &text, out),
        Command::Summary { opts } => summary(&opts.resolve()?, out),
    }
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn load_corpus(rc: &RunConfig) -> Result<LabeledCorpus, CliError> {
    let path = require(&rc.data, "data")?;
    let corpus = load_dataset(path, &DelimitedFormat::default())
        .with_context(|| format!("cannot load dataset {}", path.display()))?;
    if corpus.is_empty() {
        return Err(anyhow!("dataset {} has no records", path.display()).into());
    }
    Ok(corpus)
}

fn load_stopwords(rc: &RunConfig) -> Result<StopWords, CliError> {
    match &rc.stopwords {
        Some(path) => Ok(StopWords::from_file(path).context("cannot load stopwords")?),
        None => Ok(StopWords::builtin()),
    }
}

fn write_json<T: Serialize + ?Sized>(
    path: Option<&Path>,
    value: &T,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).context("cannot serialize output")?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")
            .with_context(|| format!("cannot write {}", p.display()))?,
        None => writeln!(out, "{text}").context("cannot write to the output stream")?,
    }
    Ok(())
}

fn stats(
    rc: &RunConfig,
    top_k: Option<usize>,
    keep_stopwords: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let corpus = load_corpus(rc)?;
    let mode = if keep_stopwords {
        StopwordMode::Skip
    } else {
        StopwordMode::Apply
    };
    let docs = frequency_by_label(&corpus, &load_stopwords(rc)?, mode).documents(top_k);
    match &rc.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
            for doc in &docs {
                write_json(
                    Some(&dir.join(format!("{}.json", doc.label_name))),
                    doc,
                    out,
                )?;
            }
        }
        None => write_json(None, &docs, out)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct PreprocessedRecord {
    tokens: Vec<String>,
    ids: Vec<u32>,
    label: u8,
}

#[derive(Serialize)]
struct PreprocessedCorpus {
    seq_len: usize,
    /// Tokens in id order, starting with the padding and out-of-vocabulary markers.
    vocabulary: Vec<String>,
    records: Vec<PreprocessedRecord>,
}

/// Vocabulary built over the whole corpus, and the encoded records.
fn encode_corpus(
    corpus: &LabeledCorpus,
    stopwords: &StopWords,
    rc: &RunConfig,
) -> Result<(Vocabulary, Vec<Vec<String>>, Vec<EncodedSequence>), CliError> {
    let tokens = corpus.tokenized(stopwords);
    let vocab = Vocabulary::build(tokens.iter().map(Vec::as_slice), rc.model.vocab_size)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let encoded = corpus
        .encode(&vocab, stopwords, rc.model.seq_len)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((vocab, tokens, encoded))
}

fn preprocess(rc: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = load_corpus(rc)?;
    let (vocab, tokens, encoded) = encode_corpus(&corpus, &load_stopwords(rc)?, rc)?;
    let doc = PreprocessedCorpus {
        seq_len: rc.model.seq_len,
        vocabulary: (0..vocab.len() as u32)
            .map(|i| vocab.token(i).unwrap_or_default().to_owned())
            .collect(),
        records: tokens
            .into_iter()
            .zip(encoded)
            .map(|(tokens, e)| PreprocessedRecord {
                tokens,
                ids: e.ids,
                label: e.label,
            })
            .collect(),
    };
    write_json(rc.out.as_deref(), &doc, out)
}

/// Output paths derived from the model path: `m.bin` gives `m.history.json`,
/// `m.history.csv` and `m.eval.json`.
pub fn companion_paths(model: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        model.with_extension("history.json"),
        model.with_extension("history.csv"),
        model.with_extension("eval.json"),
    )
}

fn train(rc: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let model_path = require(&rc.out, "out")?;
    let corpus = load_corpus(rc)?;
    let stopwords = load_stopwords(rc)?;
    let (vocab, _, encoded) = encode_corpus(&corpus, &stopwords, rc)?;
    let (history, report) = match rc.precision {
        Dtype::F32 => train_typed::<f32>(rc, vocab, stopwords, &encoded, model_path, err)?,
        Dtype::F64 => train_typed::<f64>(rc, vocab, stopwords, &encoded, model_path, err)?,
    };

    let (history_json, history_csv, eval_json) = companion_paths(model_path);
    write_json(Some(&history_json), &history, out)?;
    history_report(&history, &history_csv).context("cannot write history report")?;
    write_json(Some(&eval_json), &report, out)?;
    let last = history.last().expect("at least one epoch");
    writeln!(
        out,
        "trained {} epochs: val_loss {:.4} val_acc {:.4}; wrote {}",
        history.len(),
        last.val_loss,
        last.val_acc,
        model_path.display()
    )
    .context("cannot write to the output stream")?;
    Ok(())
}

fn train_typed<F: Scalar>(
    rc: &RunConfig,
    vocab: Vocabulary,
    stopwords: StopWords,
    data: &[EncodedSequence],
    model_path: &Path,
    err: &mut dyn Write,
) -> Result<(Vec<EpochRecord>, EvalReport), CliError> {
    let mut model = Model::<F>::build(rc.model.clone(), rc.train.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let fit = fit_with(&mut model, data, &rc.train, |r| {
        let _ = writeln!(
            err,
            "epoch {}: train_loss {:.4} train_acc {:.4} val_loss {:.4} val_acc {:.4}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        );
    })
    .context("training failed")?;
    let mut history = fit.history;
    if rc.deterministic {
        history.iter_mut().for_each(|r| r.seconds = 0.0);
    }

    let val: Vec<EncodedSequence> = fit
        .validation_indices
        .iter()
        .map(|&i| data[i].clone())
        .collect();
    let eval = evaluate(&model, &val, rc.train.batch_size).context("validation failed")?;
    let truth: Vec<u8> = val.iter().map(|s| s.label).collect();
    let report = evaluate_predictions(&truth, &eval.predictions, model.config().num_classes)
        .context("metrics failed")?;

    Classifier {
        model,
        vocab,
        stopwords,
    }
    .save(model_path)
    .context("cannot save model")?;
    Ok((history, report))
}

enum LoadedClassifier {
    F32(Classifier<f32>),
    F64(Classifier<f64>),
}

macro_rules! with_classifier {
    ($loaded:expr, $c:ident => $body:expr) => {
        match $loaded {
            LoadedClassifier::F32($c) => $body,
            LoadedClassifier::F64($c) => $body,
        }
    };
}

fn load_classifier(rc: &RunConfig) -> Result<LoadedClassifier, CliError> {
    let path = require(&rc.model_path, "model")?;
    let ctx = || format!("cannot load model {}", path.display());
    Ok(match read_precision(path).with_context(ctx)? {
        Dtype::F32 => LoadedClassifier::F32(Classifier::load(path).with_context(ctx)?),
        Dtype::F64 => LoadedClassifier::F64(Classifier::load(path).with_context(ctx)?),
    })
}

fn evaluate_cmd(rc: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_classifier(rc)?;
    let corpus = load_corpus(rc)?;
    let report = with_classifier!(&loaded, c => {
        let data = corpus
            .encode(&c.vocab, &c.stopwords, c.model.config().seq_len)
            .context("cannot encode dataset")?;
        let eval = evaluate(&c.model, &data, rc.train.batch_size).context("evaluation failed")?;
        let truth = corpus.labels();
        evaluate_predictions(&truth, &eval.predictions, c.model.config().num_classes).context("metrics failed")?
    });
    write_json(rc.out.as_deref(), &report, out)
}

fn predict_cmd(rc: &RunConfig, texts: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_classifier(rc)?;
    let predictions: Vec<Prediction> = texts
        .iter()
        .map(|t| with_classifier!(&loaded, c => c.predict(t)))
        .collect::<Result<_, _>>()
        .context("prediction failed")?;
    match predictions.as_slice() {
        [single] => write_json(rc.out.as_deref(), single, out),
        many => write_json(rc.out.as_deref(), many, out),
    }
}

fn summary(rc: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let summary: Summary = match &rc.model_path {
        Some(_) => with_classifier!(load_classifier(rc)?, c => c.model.summary()),
        None => Model::<f32>::build(rc.model.clone(), rc.train.seed)
            .map_err(|e| CliError::Usage(e.to_string()))?
            .summary(),
    };
    writeln!(out, "{summary}").context("cannot write to the output stream")?;
    if let Some(path) = &rc.out {
        write_json(Some(path), &summary, out)?;
    }
    Ok(())
}
