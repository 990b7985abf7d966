use super::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    /// Softmax over the last axis.
    Softmax,
}

impl Activation {
    pub fn apply<F: Scalar>(self, x: &Tensor<F>) -> Tensor<F> {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => tanh(x),
            Activation::Softmax => softmax_last_axis(x),
        }
    }
}

#[inline]
pub fn sigmoid_scalar<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

pub fn sigmoid<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    x.map(sigmoid_scalar)
}

pub fn tanh<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    x.map(F::tanh)
}

/// Max-subtracted softmax over each last-axis slice.
pub fn softmax_last_axis<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let mut out = x.clone();
    let width = x.last_dim();
    for row in out.data_mut().chunks_mut(width) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place<F: Scalar>(row: &mut [F]) {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}
