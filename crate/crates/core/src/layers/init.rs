//! Weight initializers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::numerics::{Scalar, Tensor};

pub fn uniform<F: Scalar, R: Rng + ?Sized>(rng: &mut R, shape: &[usize], limit: f64) -> Tensor<F> {
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| F::from_f64_lossy(dist.sample(rng)))
        .collect();
    Tensor::from_vec(shape, data).expect("shape and data agree")
}

/// Glorot/Xavier uniform: `±sqrt(6 / (fan_in + fan_out))` for a `[fan_in, fan_out]` kernel.
pub fn glorot_uniform<F: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    fan_in: usize,
    fan_out: usize,
) -> Tensor<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, &[fan_in, fan_out], limit)
}

/// Orthogonal `[rows, cols]` matrix from the QR decomposition of a Gaussian
/// matrix, sign-corrected by the diagonal of R.
pub fn orthogonal<F: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor<F> {
    let (tall, narrow) = (rows.max(cols), rows.min(cols));
    let gauss = DMatrix::<f64>::from_fn(tall, narrow, |_, _| StandardNormal.sample(rng));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..narrow {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows < cols {
        q = q.transpose();
    }
    let data = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| F::from_f64_lossy(q[(i, j)]))
        .collect();
    Tensor::from_vec(&[rows, cols], data).expect("shape and data agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_wide_matrix_has_orthonormal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rows, cols) = (4, 12);
        let q: Tensor<f64> = orthogonal(&mut rng, rows, cols);
        for a in 0..rows {
            for b in 0..rows {
                let dot: f64 = (0..cols).map(|j| q.at2(a, j) * q.at2(b, j)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "rows {a},{b}: {dot}");
            }
        }
    }

    #[test]
    fn glorot_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Tensor<f32> = glorot_uniform(&mut rng, 50, 360);
        let limit = (6.0f32 / 410.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= limit));
        assert_eq!(w.shape(), &[50, 360]);
    }

    #[test]
    fn seeded_initialization_is_reproducible() {
        let a: Tensor<f32> = uniform(&mut ChaCha8Rng::seed_from_u64(1), &[5, 5], 0.05);
        let b: Tensor<f32> = uniform(&mut ChaCha8Rng::seed_from_u64(1), &[5, 5], 0.05);
        assert_eq!(a, b);
    }
}
