//! Flag and config-file resolution into a single [`RunConfig`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use sentigru::model::ModelConfig;
use sentigru::numerics::Dtype;
use sentigru::trainer::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn dtype(self) -> Dtype {
        match self {
            Precision::F32 => Dtype::F32,
            Precision::F64 => Dtype::F64,
        }
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Precision as ValueEnum>::from_str(s, true)
    }
}

/// Hidden units of the three bidirectional layers, written `a,b,c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Units(pub [usize; 3]);

impl FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("expected three comma-separated sizes, got `{s}`"));
        };
        let p = |x: &str| x.parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
        Ok(Units([p(a)?, p(b)?, p(c)?]))
    }
}

/// Options shared by every subcommand. A config file supplies the same keys.
#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct Options {
    /// `paper` for the reference hyperparameters, or a key=value file
    #[arg(long, value_name = "PAPER|FILE")]
    pub config: Option<String>,
    /// Delimited `text,label` dataset
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Stopword list, one token per line (defaults to the built-in list)
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Model file to read
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output file or directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Fraction of records used for training
    #[arg(long)]
    pub split: Option<f64>,
    /// Keep class proportions equal across the split
    #[arg(long)]
    pub stratify: bool,
    /// Record zero wall time so outputs are byte-identical across runs
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Hidden units per direction, e.g. `120,64,64`
    #[arg(long, value_name = "A,B,C")]
    pub units: Option<Units>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub precision: Dtype,
    pub deterministic: bool,
    pub data: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::paper(),
            train: TrainConfig::default(),
            precision: Dtype::F32,
            deterministic: false,
            data: None,
            stopwords: None,
            model_path: None,
            out: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("config line {line}: bad value for `{key}`: {e}")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "config line {line}: `{key}` expects true or false"
        ))),
    }
}

impl Options {
    /// Parses flat `key = value` text. Keys mirror the long flags; `_` and
    /// `-` are interchangeable. Blank lines and `#` comments are skipped.
    pub fn from_config_text(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut o = Options::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {line}: expected key = value"))
            })?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            let path = || Some(base_dir.join(value));
            match key.as_str() {
                "data" => o.data = path(),
                "stopwords" => o.stopwords = path(),
                "model" => o.model = path(),
                "out" => o.out = path(),
                "epochs" => o.epochs = Some(parse_value(&key, value, line)?),
                "batch-size" => o.batch_size = Some(parse_value(&key, value, line)?),
                "lr" => o.lr = Some(parse_value(&key, value, line)?),
                "seed" => o.seed = Some(parse_value(&key, value, line)?),
                "seq-len" => o.seq_len = Some(parse_value(&key, value, line)?),
                "vocab-size" => o.vocab_size = Some(parse_value(&key, value, line)?),
                "dropout" => o.dropout = Some(parse_value(&key, value, line)?),
                "split" => o.split = Some(parse_value(&key, value, line)?),
                "stratify" => o.stratify = parse_bool(&key, value, line)?,
                "deterministic" => o.deterministic = parse_bool(&key, value, line)?,
                "precision" => o.precision = Some(parse_value(&key, value, line)?),
                "embed-dim" => o.embed_dim = Some(parse_value(&key, value, line)?),
                "units" => o.units = Some(parse_value(&key, value, line)?),
                "config" => {
                    return Err(CliError::Usage(format!(
                        "config line {line}: nested `config` is not allowed"
                    )))
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "config line {line}: unknown key `{other}`"
                    )))
                }
            }
        }
        Ok(o)
    }

    /// Fills every unset field from `lower`.
    pub fn or(self, lower: Options) -> Options {
        Options {
            config: self.config.or(lower.config),
            data: self.data.or(lower.data),
            stopwords: self.stopwords.or(lower.stopwords),
            model: self.model.or(lower.model),
            out: self.out.or(lower.out),
            epochs: self.epochs.or(lower.epochs),
            batch_size: self.batch_size.or(lower.batch_size),
            lr: self.lr.or(lower.lr),
            seed: self.seed.or(lower.seed),
            seq_len: self.seq_len.or(lower.seq_len),
            vocab_size: self.vocab_size.or(lower.vocab_size),
            dropout: self.dropout.or(lower.dropout),
            split: self.split.or(lower.split),
            stratify: self.stratify || lower.stratify,
            deterministic: self.deterministic || lower.deterministic,
            precision: self.precision.or(lower.precision),
            embed_dim: self.embed_dim.or(lower.embed_dim),
            units: self.units.or(lower.units),
        }
    }

    /// Flags over config file over the reference defaults.
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let merged = match self.config.clone().as_deref() {
            None | Some("paper") => self,
            Some(file) => {
                let path = Path::new(file);
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Data(anyhow::anyhow!("cannot read config {file}: {e}"))
                })?;
                let base = path.parent().unwrap_or(Path::new("."));
                self.or(Options::from_config_text(&text, base)?)
            }
        };

        let mut rc = RunConfig::default();
        let m = &mut rc.model;
        if let Some(v) = merged.vocab_size {
            m.vocab_size = v;
        }
        if let Some(v) = merged.embed_dim {
            m.embed_dim = v;
        }
        if let Some(v) = merged.seq_len {
            m.seq_len = v;
        }
        if let Some(Units(u)) = merged.units {
            m.gru_units = u;
        }
        if let Some(v) = merged.dropout {
            m.dropout_rate = v;
        }
        let t = &mut rc.train;
        if let Some(v) = merged.epochs {
            t.epochs = v;
        }
        if let Some(v) = merged.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = merged.lr {
            t.learning_rate = v;
        }
        if let Some(v) = merged.seed {
            t.seed = v;
        }
        if let Some(v) = merged.split {
            t.train_fraction = v;
        }
        t.stratify = merged.stratify;
        rc.deterministic = merged.deterministic;
        if let Some(p) = merged.precision {
            rc.precision = p.dtype();
        }
        rc.data = merged.data;
        rc.stopwords = merged.stopwords;
        rc.model_path = merged.model;
        rc.out = merged.out;

        rc.model
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        rc.train
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(rc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_parse() {
        assert_eq!("120, 64,64".parse::<Units>().unwrap(), Units([120, 64, 64]));
        assert!("1,2".parse::<Units>().is_err());
        assert!("1,x,3".parse::<Units>().is_err());
    }

    #[test]
    fn config_text_keys_and_paths() {
        let o = Options::from_config_text(
            "# run\nepochs = 3\nbatch_size=16\nunits = 8,4,4\nstratify = yes\ndata = d.csv\nprecision = f64\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(o.epochs, Some(3));
        assert_eq!(o.batch_size, Some(16));
        assert_eq!(o.units, Some(Units([8, 4, 4])));
        assert!(o.stratify);
        assert_eq!(o.data, Some(PathBuf::from("/cfg/d.csv")));
        assert_eq!(o.precision, Some(Precision::F64));
    }

    #[test]
    fn config_text_errors() {
        for bad in [
            "nonsense",
            "colour = red",
            "epochs = many",
            "stratify = maybe",
            "config = x",
        ] {
            assert!(
                matches!(
                    Options::from_config_text(bad, Path::new(".")),
                    Err(CliError::Usage(_))
                ),
                "{bad}"
            );
        }
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "epochs = 9\nlr = 0.5\nseed = 4\n").unwrap();
        let flags = Options {
            config: Some(file.display().to_string()),
            epochs: Some(2),
            ..Options::default()
        };
        let rc = flags.resolve().unwrap();
        assert_eq!(rc.train.epochs, 2);
        assert_eq!(rc.train.learning_rate, 0.5);
        assert_eq!(rc.train.seed, 4);
    }

    #[test]
    fn paper_preset_is_reference_architecture() {
        let rc = Options {
            config: Some("paper".into()),
            ..Options::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(rc.model, ModelConfig::paper());
        assert_eq!(rc.train, TrainConfig::default());
        assert_eq!(rc.precision, Dtype::F32);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let bad = Options {
            dropout: Some(1.5),
            ..Options::default()
        };
        assert!(matches!(bad.resolve(), Err(CliError::Usage(_))));
        let bad = Options {
            split: Some(1.0),
            ..Options::default()
        };
        assert!(matches!(bad.resolve(), Err(CliError::Usage(_))));
    }
}
