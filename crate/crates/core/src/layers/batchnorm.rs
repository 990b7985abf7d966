use super::{shape_err, LayerError, Param, Parameterized};
use crate::numerics::{lit, Scalar, Tensor};

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Per-channel normalization over every leading axis of a `[.., C]` input.
///
/// `gamma` and `beta` are trained; the moving statistics are updated in
/// train mode and used in infer mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<F> {
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub moving_mean: Tensor<F>,
    pub moving_var: Tensor<F>,
    momentum: F,
    epsilon: F,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<F> {
    normalized: Vec<F>,
    inv_std: Vec<F>,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(name: &str, channels: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: Param::new(
                format!("{name}.gamma"),
                Tensor::filled(&[channels], F::one()),
            ),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(&[channels])),
            moving_mean: Tensor::zeros(&[channels]),
            moving_var: Tensor::filled(&[channels], F::one()),
            momentum: lit(momentum),
            epsilon: lit(epsilon),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn momentum(&self) -> F {
        self.momentum
    }

    pub fn epsilon(&self) -> F {
        self.epsilon
    }

    fn check(&self, x: &Tensor<F>) -> Result<usize, LayerError> {
        if x.last_dim() != self.channels() {
            return Err(shape_err(
                "batch_normalization",
                format!("input {:?} for {} channels", x.shape(), self.channels()),
            ));
        }
        Ok(x.len() / self.channels())
    }

    /// Normalizes with batch statistics (biased variance) and folds them
    /// into the moving averages.
    pub fn forward_train(
        &mut self,
        x: &Tensor<F>,
    ) -> Result<(Tensor<F>, BatchNormCache<F>), LayerError> {
        let samples = self.check(x)?;
        if samples < 2 {
            return Err(LayerError::TooFewSamples(samples));
        }
        let c = self.channels();
        let n = F::from_usize(samples).expect("sample count fits");
        let mut mean = vec![F::zero(); c];
        for row in x.data().chunks(c) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![F::zero(); c];
        for row in x.data().chunks(c) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n);

        let inv_std: Vec<F> = var
            .iter()
            .map(|&v| F::one() / (v + self.epsilon).sqrt())
            .collect();
        let mut normalized = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        let (gamma, beta) = (self.gamma.value.data(), self.beta.value.data());
        for row in x.data().chunks(c) {
            for ch in 0..c {
                let xn = (row[ch] - mean[ch]) * inv_std[ch];
                normalized.push(xn);
                y.push(gamma[ch] * xn + beta[ch]);
            }
        }

        let keep = self.momentum;
        let fresh = F::one() - keep;
        for (mm, &m) in self.moving_mean.data_mut().iter_mut().zip(&mean) {
            *mm = keep * *mm + fresh * m;
        }
        for (mv, &v) in self.moving_var.data_mut().iter_mut().zip(&var) {
            *mv = keep * *mv + fresh * v;
        }
        Ok((
            Tensor::from_vec(x.shape(), y)?,
            BatchNormCache {
                normalized,
                inv_std,
            },
        ))
    }

    pub fn forward_infer(&self, x: &Tensor<F>) -> Result<Tensor<F>, LayerError> {
        self.check(x)?;
        let c = self.channels();
        let scale: Vec<F> = self
            .moving_var
            .data()
            .iter()
            .zip(self.gamma.value.data())
            .map(|(&v, &g)| g / (v + self.epsilon).sqrt())
            .collect();
        let mean = self.moving_mean.data();
        let beta = self.beta.value.data();
        let mut y = x.clone();
        for row in y.data_mut().chunks_mut(c) {
            for ch in 0..c {
                row[ch] = (row[ch] - mean[ch]) * scale[ch] + beta[ch];
            }
        }
        Ok(y)
    }

    /// Standard batch-norm gradient including the mean and variance terms:
    /// `dx = inv_std / N · (N·dx̂ − Σdx̂ − x̂·Σ(dx̂·x̂))` with `dx̂ = dy·γ`.
    pub fn backward(
        &mut self,
        cache: &BatchNormCache<F>,
        d_out: &Tensor<F>,
    ) -> Result<Tensor<F>, LayerError> {
        let c = self.channels();
        if d_out.len() != cache.normalized.len() || d_out.last_dim() != c {
            return Err(shape_err(
                "batch_normalization",
                format!("gradient {:?}", d_out.shape()),
            ));
        }
        let samples = d_out.len() / c;
        let n = F::from_usize(samples).expect("sample count fits");
        let mut sum_dy = vec![F::zero(); c];
        let mut sum_dy_xn = vec![F::zero(); c];
        for (dy_row, xn_row) in d_out.data().chunks(c).zip(cache.normalized.chunks(c)) {
            for ch in 0..c {
                sum_dy[ch] += dy_row[ch];
                sum_dy_xn[ch] += dy_row[ch] * xn_row[ch];
            }
        }
        for ch in 0..c {
            self.beta.grad.data_mut()[ch] += sum_dy[ch];
            self.gamma.grad.data_mut()[ch] += sum_dy_xn[ch];
        }
        let gamma = self.gamma.value.data();
        let mut dx = Vec::with_capacity(d_out.len());
        for (dy_row, xn_row) in d_out.data().chunks(c).zip(cache.normalized.chunks(c)) {
            for ch in 0..c {
                let k = gamma[ch] * cache.inv_std[ch] / n;
                dx.push(k * (n * dy_row[ch] - sum_dy[ch] - xn_row[ch] * sum_dy_xn[ch]));
            }
        }
        Ok(Tensor::from_vec(d_out.shape(), dx)?)
    }
}

impl<F: Scalar> Parameterized<F> for BatchNorm<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    /// Counts the affine parameters plus both moving statistics.
    fn param_count(&self) -> usize {
        4 * self.channels()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::testutil::{check_layer, random_tensor, weighted_sum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn train_mode_standardizes_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Tensor<f32> = random_tensor(&mut rng, &[4, 7, 3], 5.0).cast();
        let mut bn = BatchNorm::new("bn", 3, DEFAULT_MOMENTUM, DEFAULT_EPSILON);
        let (y, _) = bn.forward_train(&x).unwrap();
        for ch in 0..3 {
            let vals: Vec<f32> = y.data().iter().skip(ch).step_by(3).copied().collect();
            let n = vals.len() as f32;
            let mean = vals.iter().sum::<f32>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / n;
            assert!(mean.abs() < 1e-5, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let mut bn = BatchNorm::<f64>::new("bn", 2, DEFAULT_MOMENTUM, DEFAULT_EPSILON);
        bn.beta.value = Tensor::from_vec(&[2], vec![0.25, -3.0]).unwrap();
        let x = Tensor::from_vec(&[3, 2], vec![7.0, 1.0, 7.0, 2.0, 7.0, 3.0]).unwrap();
        let (y, _) = bn.forward_train(&x).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row[0], 0.25);
            assert!(row[1].is_finite());
        }
    }

    #[test]
    fn moving_statistics_follow_momentum() {
        let mut bn = BatchNorm::<f64>::new("bn", 1, 0.9, 1e-5);
        let x = Tensor::from_vec(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        bn.forward_train(&x).unwrap();
        // batch mean 2.5, biased variance 1.25
        assert!((bn.moving_mean.data()[0] - 0.25).abs() < 1e-15);
        assert!((bn.moving_var.data()[0] - (0.9 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn infer_mode_uses_moving_statistics() {
        let mut bn = BatchNorm::<f64>::new("bn", 1, 0.9, 0.0);
        bn.moving_mean = Tensor::from_vec(&[1], vec![2.0]).unwrap();
        bn.moving_var = Tensor::from_vec(&[1], vec![4.0]).unwrap();
        let y = bn
            .forward_infer(&Tensor::from_vec(&[2, 1], vec![4.0, 0.0]).unwrap())
            .unwrap();
        assert_eq!(y.data(), &[1.0, -1.0]);
    }

    #[test]
    fn single_sample_train_mode_is_rejected() {
        let mut bn = BatchNorm::<f32>::new("bn", 3, 0.9, 1e-5);
        assert_eq!(
            bn.forward_train(&Tensor::zeros(&[1, 1, 3])).unwrap_err(),
            LayerError::TooFewSamples(1)
        );
    }

    #[test]
    fn paper_channel_count() {
        assert_eq!(
            BatchNorm::<f32>::new("bn", 128, 0.9, 1e-5).param_count(),
            512
        );
    }

    #[test]
    fn gradients_pass_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut bn = BatchNorm::new("bn", 3, DEFAULT_MOMENTUM, DEFAULT_EPSILON);
        bn.gamma.value = random_tensor(&mut rng, &[3], 1.5);
        bn.beta.value = random_tensor(&mut rng, &[3], 1.0);
        let x = random_tensor(&mut rng, &[2, 4, 3], 2.0);
        let w = random_tensor(&mut rng, &[2, 4, 3], 1.0);
        let mut with_grads = bn.clone();
        let (_, cache) = with_grads.forward_train(&x).unwrap();
        let dx = with_grads.backward(&cache, &w).unwrap();
        let report = check_layer(
            &bn,
            &x,
            |l, x| weighted_sum(&l.forward_train(x).unwrap().0, &w),
            &with_grads,
            &dx,
        );
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}
