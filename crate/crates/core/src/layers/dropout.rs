use rand::Rng;

use super::{shape_err, LayerError, Mode};
use crate::numerics::{Scalar, Tensor};

/// Inverted dropout. Holds no weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

/// Per-element scale factors from one train-mode call; `None` means identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<F>(Option<Vec<F>>);

impl Dropout {
    pub fn new(rate: f64) -> Result<Self, LayerError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(LayerError::InvalidRate(rate));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward<F: Scalar, R: Rng + ?Sized>(
        &self,
        x: &Tensor<F>,
        mode: Mode,
        rng: &mut R,
    ) -> (Tensor<F>, DropoutMask<F>) {
        if mode == Mode::Infer || self.rate == 0.0 {
            return (x.clone(), DropoutMask(None));
        }
        let keep = F::from_f64_lossy(1.0 / (1.0 - self.rate));
        let mask: Vec<F> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < self.rate {
                    F::zero()
                } else {
                    keep
                }
            })
            .collect();
        let mut y = x.clone();
        for (v, &m) in y.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        (y, DropoutMask(Some(mask)))
    }

    pub fn backward<F: Scalar>(
        &self,
        mask: &DropoutMask<F>,
        d_out: &Tensor<F>,
    ) -> Result<Tensor<F>, LayerError> {
        match &mask.0 {
            None => Ok(d_out.clone()),
            Some(m) if m.len() != d_out.len() => Err(shape_err(
                "dropout",
                format!("mask of {} for gradient {:?}", m.len(), d_out.shape()),
            )),
            Some(m) => {
                let mut dx = d_out.clone();
                for (v, &k) in dx.data_mut().iter_mut().zip(m) {
                    *v *= k;
                }
                Ok(dx)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_is_identity_in_both_modes() {
        let d = Dropout::new(0.0).unwrap();
        let x = Tensor::from_vec(&[4], vec![1.0f32, -2.0, 3.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [Mode::Train, Mode::Infer] {
            assert_eq!(d.forward(&x, mode, &mut rng).0, x);
        }
    }

    #[test]
    fn infer_mode_is_identity() {
        let d = Dropout::new(0.5).unwrap();
        let x = Tensor::from_vec(&[3], vec![1.0f32, 2.0, 3.0]).unwrap();
        let (y, mask) = d.forward(&x, Mode::Infer, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(y, x);
        assert_eq!(mask, DropoutMask(None));
    }

    #[test]
    fn train_mode_preserves_expectation() {
        // Mean of n scaled Bernoulli(0.7) draws: sd = sqrt(p(1-p)/n)/(1-p).
        let n = 100_000;
        let rate = 0.3;
        let d = Dropout::new(rate).unwrap();
        let x = Tensor::<f64>::filled(&[n], 1.0);
        let (y, _) = d.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(42));
        let mean = y.data().iter().sum::<f64>() / n as f64;
        let sigma = (rate * (1.0 - rate) / n as f64).sqrt() / (1.0 - rate);
        assert!(
            (mean - 1.0).abs() < 3.0 * sigma,
            "mean {mean}, sigma {sigma}"
        );
        let dropped = y.data().iter().filter(|&&v| v == 0.0).count();
        assert!(dropped > 0);
    }

    #[test]
    fn backward_reuses_forward_mask() {
        let d = Dropout::new(0.5).unwrap();
        let x = Tensor::<f64>::filled(&[64], 1.0);
        let (y, mask) = d.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(3));
        let dx = d.backward(&mask, &Tensor::filled(&[64], 1.0)).unwrap();
        assert_eq!(dx, y);
    }

    #[test]
    fn rate_must_be_below_one() {
        assert_eq!(Dropout::new(1.0), Err(LayerError::InvalidRate(1.0)));
        assert!(Dropout::new(-0.1).is_err());
    }
}
