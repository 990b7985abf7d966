use super::TrainError;
use crate::layers::Param;
use crate::numerics::{Scalar, Tensor};

/// First and second moment buffers, one per parameter tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState<F> {
    pub m: Vec<Tensor<F>>,
    pub v: Vec<Tensor<F>>,
    pub t: u64,
}

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub state: OptimizerState<F>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            state: OptimizerState {
                m: Vec::new(),
                v: Vec::new(),
                t: 0,
            },
        }
    }

    /// One update of every parameter from its accumulated gradient.
    ///
    /// Gradients are checked for finiteness before anything is modified.
    pub fn step(&mut self, params: &mut [&mut Param<F>]) -> Result<(), TrainError> {
        if let Some(p) = params.iter().find(|p| !p.grad.is_finite()) {
            return Err(TrainError::NonFiniteGradient(p.name.clone()));
        }
        if self.state.m.is_empty() {
            self.state.m = params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect();
            self.state.v = self.state.m.clone();
        }
        if self.state.m.len() != params.len()
            || self
                .state
                .m
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.shape() != p.value.shape())
        {
            return Err(TrainError::Config(
                "optimizer state does not match the parameter list".into(),
            ));
        }

        self.state.t += 1;
        let t = i32::try_from(self.state.t).unwrap_or(i32::MAX);
        let b1 = F::from_f64_lossy(self.beta1);
        let b2 = F::from_f64_lossy(self.beta2);
        let lr = F::from_f64_lossy(self.learning_rate);
        let eps = F::from_f64_lossy(self.epsilon);
        let one = F::one();
        let correction1 = one - b1.powi(t);
        let correction2 = one - b2.powi(t);

        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.state.m)
            .zip(&mut self.state.v)
        {
            let grads = p.grad.data();
            let values = p.value.data_mut();
            for (((theta, &g), m), v) in values
                .iter_mut()
                .zip(grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<F: Scalar>(params: &mut [&mut Param<F>], max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .flat_map(|p| p.grad.data())
        .map(|g| {
            let g = g.to_f64_lossless();
            g * g
        })
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = F::from_f64_lossy(max_norm / norm);
        for p in params.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}
