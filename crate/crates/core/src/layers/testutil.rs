use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::Parameterized;
use crate::numerics::{grad_check, GradCheckReport, Tensor, DEFAULT_STEP};

pub fn random_tensor<R: Rng>(rng: &mut R, shape: &[usize], scale: f64) -> Tensor<f64> {
    let dist = Uniform::new(-scale, scale).unwrap();
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| dist.sample(rng)).collect()).unwrap()
}

pub fn weighted_sum(y: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    assert_eq!(y.shape(), w.shape());
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

/// Grad-checks every parameter of `layer` plus its input `x`.
///
/// `with_grads` holds the analytic parameter gradients; `dx` the analytic
/// input gradient.
pub fn check_layer<L>(
    layer: &L,
    x: &Tensor<f64>,
    loss: impl Fn(&mut L, &Tensor<f64>) -> f64,
    with_grads: &L,
    dx: &Tensor<f64>,
) -> GradCheckReport
where
    L: Parameterized<f64> + Clone,
{
    let mut params: Vec<(String, Tensor<f64>)> = layer
        .params()
        .into_iter()
        .map(|p| (p.name.clone(), p.value.clone()))
        .collect();
    params.push(("input".to_string(), x.clone()));
    let mut analytic: Vec<Tensor<f64>> = with_grads
        .params()
        .into_iter()
        .map(|p| p.grad.clone())
        .collect();
    analytic.push(dx.clone());

    let n = params.len() - 1;
    grad_check(
        |values| {
            let mut probe = layer.clone();
            for (p, v) in probe.params_mut().into_iter().zip(&values[..n]) {
                p.value = v.clone();
            }
            loss(&mut probe, &values[n])
        },
        &params,
        &analytic,
        DEFAULT_STEP,
    )
    .unwrap()
}
