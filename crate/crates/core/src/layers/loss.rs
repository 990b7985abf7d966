use super::{shape_err, LayerError};
use crate::numerics::{Scalar, Tensor};

/// Mean categorical cross-entropy over a `[B, K]` logit block and the
/// matching `(softmax − onehot) / B` gradient, via log-sum-exp.
pub fn softmax_cross_entropy<F: Scalar>(
    logits: &Tensor<F>,
    labels: &[usize],
) -> Result<(F, Tensor<F>), LayerError> {
    if logits.shape().len() != 2 || logits.shape()[0] != labels.len() {
        return Err(shape_err(
            "softmax_cross_entropy",
            format!("logits {:?} for {} labels", logits.shape(), labels.len()),
        ));
    }
    let classes = logits.shape()[1];
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(LayerError::LabelOutOfRange { label, classes });
    }
    let batch = F::from_usize(labels.len()).expect("batch fits");
    let mut total = F::zero();
    let mut grad = logits.clone();
    for (row, &label) in grad.data_mut().chunks_mut(classes).zip(labels) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let sum_exp: F = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        total += log_z - row[label];
        for v in row.iter_mut() {
            *v = (*v - log_z).exp() / batch;
        }
        row[label] -= F::one() / batch;
    }
    Ok((total / batch, grad))
}
