//! Forward and hand-derived backward passes for every layer in the stack.
//!
//! Forward calls return an explicit cache value that the matching backward
//! call consumes, so a frozen layer can serve inference from many threads.
//! Backward calls accumulate into each [`Param`]'s `grad` buffer.

mod batchnorm;
mod bidirectional;
mod dense;
mod dropout;
mod embedding;
mod gru;
pub mod init;
mod loss;
#[cfg(test)]
pub(crate) mod testutil;

use crate::numerics::{NumericsError, Scalar, Tensor};

pub use batchnorm::{
    BatchNorm, BatchNormCache, DEFAULT_EPSILON as BATCHNORM_EPSILON,
    DEFAULT_MOMENTUM as BATCHNORM_MOMENTUM,
};
pub use bidirectional::{reverse_time, BidirectionalCache, BidirectionalGru};
pub use dense::Dense;
pub use dropout::{Dropout, DropoutMask};
pub use embedding::Embedding;
pub use gru::{gru_sequence_forward, GruCache, GruCell};
pub use loss::softmax_cross_entropy;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LayerError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("shape mismatch in {layer}: {detail}")]
    Shape { layer: &'static str, detail: String },
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    IdOutOfRange { id: u32, vocab: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("batch normalization needs at least 2 samples per channel in train mode, got {0}")]
    TooFewSamples(usize),
    #[error("sequence must have at least one time step")]
    EmptySequence,
}

pub(crate) fn shape_err(layer: &'static str, detail: impl Into<String>) -> LayerError {
    LayerError::Shape {
        layer,
        detail: detail.into(),
    }
}

/// Train mode enables dropout and batch statistics; infer mode is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub name: String,
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
}

impl<F: Scalar> Param<F> {
    pub fn new(name: impl Into<String>, value: Tensor<F>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Access to a layer's trainable tensors, in a fixed order.
pub trait Parameterized<F> {
    fn params(&self) -> Vec<&Param<F>>;
    fn params_mut(&mut self) -> Vec<&mut Param<F>>;

    /// Total weight count, trainable or not.
    fn param_count(&self) -> usize;

    fn zero_grad(&mut self)
    where
        F: Scalar,
    {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Sums `rows` consecutive slices of width `width` into `out`.
pub(crate) fn add_column_sums<F: Scalar>(src: &[F], width: usize, out: &mut [F]) {
    for row in src.chunks(width) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}
