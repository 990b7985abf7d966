//! Mini-batch training with Adam and per-epoch validation.

mod adam;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{split_indices, CorpusError, EncodedSequence};
use crate::layers::softmax_cross_entropy;
use crate::model::{argmax, Model, ModelError};
use crate::numerics::Scalar;

pub use adam::{clip_global_norm, Adam, OptimizerState};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss {loss} in batch {batch} of epoch {epoch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("no training data")]
    NoData,
}

impl From<crate::layers::LayerError> for TrainError {
    fn from(e: crate::layers::LayerError) -> Self {
        TrainError::Model(ModelError::Layer(e))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub train_fraction: f64,
    pub stratify: bool,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            train_fraction: 0.8,
            stratify: false,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} {b} outside [0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon {} must be positive", self.epsilon));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return fail(format!("clip_norm {c} must be positive"));
            }
        }
        Ok(())
    }

    pub fn optimizer<F: Scalar>(&self) -> Adam<F> {
        Adam::new(self.learning_rate, self.beta1, self.beta2, self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub seconds: f64,
}

/// Mean loss and accuracy over a pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

/// Infer-mode results over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub history: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

/// Shuffles `0..n` and cuts it into consecutive batches; the last may be short.
pub fn plan_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

fn gather(data: &[EncodedSequence], idx: &[usize]) -> (Vec<u32>, Vec<usize>) {
    let mut ids = Vec::with_capacity(idx.len() * data.first().map_or(0, |s| s.ids.len()));
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        ids.extend_from_slice(&data[i].ids);
        labels.push(data[i].label as usize);
    }
    (ids, labels)
}

/// One pass over `data` in train mode, updating parameters after each batch.
///
/// Loss is the per-sample mean; accuracy counts argmax hits of the
/// train-mode logits.
pub fn train_epoch<F: Scalar, R: Rng + ?Sized>(
    model: &mut Model<F>,
    data: &[EncodedSequence],
    batch_size: usize,
    optimizer: &mut Adam<F>,
    rng: &mut R,
    clip_norm: Option<f64>,
    epoch: usize,
) -> Result<EpochStats, TrainError> {
    if data.is_empty() {
        return Err(TrainError::NoData);
    }
    let classes = model.config().num_classes;
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    for (bi, idx) in plan_batches(data.len(), batch_size, rng).iter().enumerate() {
        let (ids, labels) = gather(data, idx);
        model.zero_grad();
        let (logits, cache) = model.forward_train(&ids, idx.len(), rng)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, &labels)?;
        let loss = loss.to_f64_lossless();
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: bi,
                loss,
            });
        }
        model.backward(&cache, &d_logits)?;
        let mut params = model.params_mut();
        if let Some(max) = clip_norm {
            clip_global_norm(&mut params, max);
        }
        optimizer.step(&mut params)?;

        total_loss += loss * idx.len() as f64;
        correct += logits
            .data()
            .chunks(classes)
            .zip(&labels)
            .filter(|(row, &l)| argmax(row) == l)
            .count();
    }
    Ok(EpochStats {
        loss: total_loss / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Infer-mode evaluation, batched by `batch_size`.
pub fn evaluate<F: Scalar>(
    model: &Model<F>,
    data: &[EncodedSequence],
    batch_size: usize,
) -> Result<Evaluation, TrainError> {
    if data.is_empty() {
        return Err(TrainError::NoData);
    }
    let classes = model.config().num_classes;
    let mut total_loss = 0.0;
    let mut predictions = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for idx in all.chunks(batch_size.max(1)) {
        let (ids, labels) = gather(data, idx);
        let logits = model.forward(&ids, idx.len())?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        total_loss += loss.to_f64_lossless() * idx.len() as f64;
        predictions.extend(logits.data().chunks(classes).map(|row| argmax(row) as u8));
    }
    let correct = predictions
        .iter()
        .zip(data)
        .filter(|(p, s)| **p == s.label)
        .count();
    Ok(Evaluation {
        loss: total_loss / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        predictions,
    })
}

/// Splits once, then trains for `config.epochs`, validating in infer mode
/// after every epoch.
pub fn fit<F: Scalar>(
    model: &mut Model<F>,
    data: &[EncodedSequence],
    config: &TrainConfig,
) -> Result<FitReport, TrainError> {
    fit_with(model, data, config, |_| {})
}

/// [`fit`] with a callback invoked after each epoch.
pub fn fit_with<F: Scalar>(
    model: &mut Model<F>,
    data: &[EncodedSequence],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitReport, TrainError> {
    config.validate()?;
    let labels: Vec<u8> = data.iter().map(|s| s.label).collect();
    let (train_idx, val_idx) = split_indices(
        data.len(),
        config.stratify.then_some(labels.as_slice()),
        config.train_fraction,
        config.seed,
    )?;
    if train_idx.is_empty() {
        return Err(TrainError::EmptySplit("training"));
    }
    if val_idx.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let train: Vec<EncodedSequence> = train_idx.iter().map(|&i| data[i].clone()).collect();
    let val: Vec<EncodedSequence> = val_idx.iter().map(|&i| data[i].clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut optimizer = config.optimizer::<F>();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let stats = train_epoch(
            model,
            &train,
            config.batch_size,
            &mut optimizer,
            &mut rng,
            config.clip_norm,
            epoch,
        )?;
        let val_eval = evaluate(model, &val, config.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: stats.loss,
            train_acc: stats.accuracy,
            val_loss: val_eval.loss,
            val_acc: val_eval.accuracy,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(FitReport {
        history,
        train_indices: train_idx,
        validation_indices: val_idx,
    })
}
