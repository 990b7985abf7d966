//! The full classifier stack:
//!
//! ```text
//! Embedding → Dropout → BiGRU(seq) → BiGRU(seq) → BatchNorm → BiGRU(final) → Dense
//! ```

mod io;
mod predict;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DEFAULT_SEQ_LEN, DEFAULT_VOCAB_SIZE, NUM_CLASSES};
use crate::layers::{
    BatchNorm, BatchNormCache, BidirectionalCache, BidirectionalGru, Dense, Dropout, DropoutMask,
    Embedding, LayerError, Mode, Param, Parameterized, BATCHNORM_EPSILON, BATCHNORM_MOMENTUM,
};
use crate::numerics::{Scalar, Tensor};

pub use io::{inspect_sections, read_precision, Classifier, SectionInfo, FORMAT_VERSION, MAGIC};
pub use predict::{argmax, predict, Prediction};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error("expected sequences of length {expected}, got {found}")]
    SeqLenMismatch { expected: usize, found: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("checksum mismatch in section {index} ({tag})")]
    ChecksumMismatch { index: usize, tag: String },
    #[error("model file is truncated")]
    Truncated,
    #[error("incomplete model: missing {0}")]
    Incomplete(String),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model file stores {file} parameters, {requested} requested")]
    DtypeMismatch {
        file: &'static str,
        requested: &'static str,
    },
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub seq_len: usize,
    /// Hidden units per direction for the three bidirectional layers.
    pub gru_units: [usize; 3],
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub batchnorm_momentum: f64,
    pub batchnorm_epsilon: f64,
}

impl ModelConfig {
    /// The reference architecture: 2,817,126 weights.
    pub fn paper() -> Self {
        Self {
            vocab_size: DEFAULT_VOCAB_SIZE,
            embed_dim: 50,
            seq_len: DEFAULT_SEQ_LEN,
            gru_units: [120, 64, 64],
            dropout_rate: 0.3,
            num_classes: NUM_CLASSES,
            batchnorm_momentum: BATCHNORM_MOMENTUM,
            batchnorm_epsilon: BATCHNORM_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::InvalidConfig(m));
        if self.vocab_size < 3 {
            return fail(format!("vocab_size {} < 3", self.vocab_size));
        }
        if self.embed_dim == 0 || self.seq_len == 0 || self.gru_units.contains(&0) {
            return fail("embed_dim, seq_len and gru_units must be positive".into());
        }
        if !(2..=NUM_CLASSES).contains(&self.num_classes) {
            return fail(format!(
                "num_classes {} outside 2..={NUM_CLASSES}",
                self.num_classes
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(0.0..1.0).contains(&self.batchnorm_momentum) {
            return fail(format!(
                "batchnorm_momentum {} outside [0, 1)",
                self.batchnorm_momentum
            ));
        }
        if !(self.batchnorm_epsilon > 0.0) {
            return fail(format!(
                "batchnorm_epsilon {} must be positive",
                self.batchnorm_epsilon
            ));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::paper()
    }
}

/// One line of the model summary table.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub kind: String,
    /// Leading `None` is the unconstrained batch axis.
    pub output_shape: Vec<Option<usize>>,
    pub params: usize,
}

impl SummaryRow {
    pub fn shape_string(&self) -> String {
        let dims: Vec<String> = self
            .output_shape
            .iter()
            .map(|d| d.map_or_else(|| "None".to_string(), |v| v.to_string()))
            .collect();
        format!("({})", dims.join(", "))
    }
}

/// Per-model summary: rows plus totals.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub total_params: usize,
    pub trainable_params: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = "=".repeat(72);
        writeln!(
            f,
            "{:<42}{:<20}{:>10}",
            "Layer (type)", "Output Shape", "Param #"
        )?;
        writeln!(f, "{rule}")?;
        for row in &self.rows {
            let label = format!("{} ({})", row.name, row.kind);
            writeln!(f, "{label:<42}{:<20}{:>10}", row.shape_string(), row.params)?;
        }
        writeln!(f, "{rule}")?;
        writeln!(f, "Total params: {}", self.total_params)?;
        writeln!(f, "Trainable params: {}", self.trainable_params)?;
        write!(
            f,
            "Non-trainable params: {}",
            self.total_params - self.trainable_params
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    config: ModelConfig,
    pub embedding: Embedding<F>,
    pub dropout: Dropout,
    pub encoder1: BidirectionalGru<F>,
    pub encoder2: BidirectionalGru<F>,
    pub batchnorm: BatchNorm<F>,
    pub encoder3: BidirectionalGru<F>,
    pub dense: Dense<F>,
}

/// Activations from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    ids: Vec<u32>,
    batch: usize,
    dropout: DropoutMask<F>,
    encoder1: BidirectionalCache<F>,
    encoder2: BidirectionalCache<F>,
    batchnorm: BatchNormCache<F>,
    encoder3: BidirectionalCache<F>,
    dense_input: Tensor<F>,
}

impl<F: Scalar> Model<F> {
    /// Deterministic initialization from `seed`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [u1, u2, u3] = config.gru_units;
        let embedding = Embedding::new("embedding", config.vocab_size, config.embed_dim, &mut rng);
        let dropout = Dropout::new(config.dropout_rate)?;
        let encoder1 =
            BidirectionalGru::new("bidirectional_1", config.embed_dim, u1, true, &mut rng);
        let encoder2 = BidirectionalGru::new("bidirectional_2", 2 * u1, u2, true, &mut rng);
        let batchnorm = BatchNorm::new(
            "batch_normalization",
            2 * u2,
            config.batchnorm_momentum,
            config.batchnorm_epsilon,
        );
        let encoder3 = BidirectionalGru::new("bidirectional_3", 2 * u2, u3, false, &mut rng);
        let dense = Dense::new("dense", 2 * u3, config.num_classes, &mut rng);
        Ok(Self {
            config,
            embedding,
            dropout,
            encoder1,
            encoder2,
            batchnorm,
            encoder3,
            dense,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn summary(&self) -> Summary {
        let t = Some(self.config.seq_len);
        let [u1, u2, u3] = self.config.gru_units;
        let row = |name: &str, kind: &str, shape: Vec<Option<usize>>, params: usize| SummaryRow {
            name: name.into(),
            kind: kind.into(),
            output_shape: std::iter::once(None).chain(shape).collect(),
            params,
        };
        let rows = vec![
            row(
                "embedding",
                "Embedding",
                vec![t, Some(self.config.embed_dim)],
                self.embedding.param_count(),
            ),
            row(
                "dropout",
                "Dropout",
                vec![t, Some(self.config.embed_dim)],
                0,
            ),
            row(
                "bidirectional_1",
                "Bidirectional",
                vec![t, Some(2 * u1)],
                self.encoder1.param_count(),
            ),
            row(
                "bidirectional_2",
                "Bidirectional",
                vec![t, Some(2 * u2)],
                self.encoder2.param_count(),
            ),
            row(
                "batch_normalization",
                "BatchNormalization",
                vec![t, Some(2 * u2)],
                self.batchnorm.param_count(),
            ),
            row(
                "bidirectional_3",
                "Bidirectional",
                vec![Some(2 * u3)],
                self.encoder3.param_count(),
            ),
            row(
                "dense",
                "Dense",
                vec![Some(self.config.num_classes)],
                self.dense.param_count(),
            ),
        ];
        let total_params = rows.iter().map(|r| r.params).sum();
        let trainable_params = self.params().iter().map(|p| p.len()).sum();
        Summary {
            rows,
            total_params,
            trainable_params,
        }
    }

    pub fn param_count(&self) -> usize {
        self.summary().total_params
    }

    fn check_ids(&self, ids: &[u32], batch: usize) -> Result<(), ModelError> {
        let t = self.config.seq_len;
        if batch == 0 || !ids.len().is_multiple_of(batch) || ids.len() / batch != t {
            return Err(ModelError::SeqLenMismatch {
                expected: t,
                found: if batch == 0 { 0 } else { ids.len() / batch },
            });
        }
        Ok(())
    }

    /// Infer-mode logits `[batch, classes]` for a row-major `[batch, seq_len]` id block.
    pub fn forward(&self, ids: &[u32], batch: usize) -> Result<Tensor<F>, ModelError> {
        self.check_ids(ids, batch)?;
        let x = self.embedding.forward(ids, batch, self.config.seq_len)?;
        let (x, _) = self.encoder1.forward(&x)?;
        let (x, _) = self.encoder2.forward(&x)?;
        let x = self.batchnorm.forward_infer(&x)?;
        let (x, _) = self.encoder3.forward(&x)?;
        Ok(self.dense.forward(&x)?)
    }

    /// Train-mode forward: dropout draws from `rng`, batch norm uses batch
    /// statistics and updates its moving averages.
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        ids: &[u32],
        batch: usize,
        rng: &mut R,
    ) -> Result<(Tensor<F>, ForwardCache<F>), ModelError> {
        self.check_ids(ids, batch)?;
        let x = self.embedding.forward(ids, batch, self.config.seq_len)?;
        let (x, dropout) = self.dropout.forward(&x, Mode::Train, rng);
        let (x, encoder1) = self.encoder1.forward(&x)?;
        let (x, encoder2) = self.encoder2.forward(&x)?;
        let (x, batchnorm) = self.batchnorm.forward_train(&x)?;
        let (dense_input, encoder3) = self.encoder3.forward(&x)?;
        let logits = self.dense.forward(&dense_input)?;
        let cache = ForwardCache {
            ids: ids.to_vec(),
            batch,
            dropout,
            encoder1,
            encoder2,
            batchnorm,
            encoder3,
            dense_input,
        };
        Ok((logits, cache))
    }

    /// Accumulates parameter gradients for `d_logits` into every [`Param::grad`].
    pub fn backward(
        &mut self,
        cache: &ForwardCache<F>,
        d_logits: &Tensor<F>,
    ) -> Result<(), ModelError> {
        let d = self.dense.backward(&cache.dense_input, d_logits)?;
        let d = self.encoder3.backward(&cache.encoder3, &d)?;
        let d = self.batchnorm.backward(&cache.batchnorm, &d)?;
        let d = self.encoder2.backward(&cache.encoder2, &d)?;
        let d = self.encoder1.backward(&cache.encoder1, &d)?;
        let d = self.dropout.backward(&cache.dropout, &d)?;
        self.embedding.backward(&cache.ids, &d)?;
        debug_assert_eq!(cache.ids.len() / cache.batch, self.config.seq_len);
        Ok(())
    }

    /// Every trainable tensor in stack order.
    pub fn params(&self) -> Vec<&Param<F>> {
        let mut v = self.embedding.params();
        v.extend(self.encoder1.params());
        v.extend(self.encoder2.params());
        v.extend(self.batchnorm.params());
        v.extend(self.encoder3.params());
        v.extend(self.dense.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut v = self.embedding.params_mut();
        v.extend(self.encoder1.params_mut());
        v.extend(self.encoder2.params_mut());
        v.extend(self.batchnorm.params_mut());
        v.extend(self.encoder3.params_mut());
        v.extend(self.dense.params_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Named trainable tensors followed by the batch-norm moving statistics.
    pub fn state_tensors(&self) -> Vec<(String, &Tensor<F>)> {
        let mut v: Vec<(String, &Tensor<F>)> = self
            .params()
            .into_iter()
            .map(|p| (p.name.clone(), &p.value))
            .collect();
        v.push((
            "batch_normalization.moving_mean".into(),
            &self.batchnorm.moving_mean,
        ));
        v.push((
            "batch_normalization.moving_var".into(),
            &self.batchnorm.moving_var,
        ));
        v
    }

    fn state_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut v: Vec<(String, &mut Tensor<F>)> = Vec::new();
        let Self {
            embedding,
            encoder1,
            encoder2,
            batchnorm,
            encoder3,
            dense,
            ..
        } = self;
        for p in embedding.params_mut() {
            v.push((p.name.clone(), &mut p.value));
        }
        for enc in [&mut *encoder1, &mut *encoder2] {
            for p in enc.params_mut() {
                v.push((p.name.clone(), &mut p.value));
            }
        }
        v.push((batchnorm.gamma.name.clone(), &mut batchnorm.gamma.value));
        v.push((batchnorm.beta.name.clone(), &mut batchnorm.beta.value));
        for p in encoder3.params_mut().into_iter().chain(dense.params_mut()) {
            v.push((p.name.clone(), &mut p.value));
        }
        v.push((
            "batch_normalization.moving_mean".into(),
            &mut batchnorm.moving_mean,
        ));
        v.push((
            "batch_normalization.moving_var".into(),
            &mut batchnorm.moving_var,
        ));
        v
    }
}
