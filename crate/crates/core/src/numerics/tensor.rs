use super::{NumericsError, Scalar};

/// Dense row-major n-dimensional array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, F::zero())
    }

    pub fn filled(shape: &[usize], value: F) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d >= 1),
            "invalid tensor shape {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self, NumericsError> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(NumericsError::InvalidShape(shape.to_vec()));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(NumericsError::LengthMismatch {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a 2-D tensor from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flatten().copied().collect();
        Self::from_vec(&[rows.len(), cols], data).expect("valid 2-D rows")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the last axis.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().expect("non-empty shape")
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, NumericsError> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(NumericsError::InvalidShape(shape.to_vec()));
        }
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(NumericsError::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn fill(&mut self, value: F) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element at a 2-D index.
    pub fn at2(&self, row: usize, col: usize) -> F {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[row * self.shape[1] + col]
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| G::from_f64_lossy(v.to_f64_lossless()))
                .collect(),
        }
    }
}

/// `c[m×n] += a[m×k] · b[k×n]`, accumulating over `k` in ascending order.
pub fn gemm_acc<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (c_ij, &b_pj) in c_row.iter_mut().zip(b_row) {
                *c_ij += a_ip * b_pj;
            }
        }
    }
}

/// `c[k×n] += aᵀ · b` where `a` is `m×k` and `b` is `m×n`.
pub fn gemm_at_b_acc<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let c_row = &mut c[p * n..(p + 1) * n];
            for (c_pj, &b_ij) in c_row.iter_mut().zip(b_row) {
                *c_pj += a_ip * b_ij;
            }
        }
    }
}

/// `c[m×k] += a · bᵀ` where `a` is `m×n` and `b` is `k×n`.
pub fn gemm_a_bt_acc<F: Scalar>(a: &[F], b: &[F], c: &mut [F], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            let mut acc = F::zero();
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            c[i * k + p] += acc;
        }
    }
}

/// Matrix product of two 2-D tensors.
pub fn matmul<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>, NumericsError> {
    if a.shape().len() != 2 || b.shape().len() != 2 {
        return Err(NumericsError::ShapeMismatch(format!(
            "matmul expects 2-D operands, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(NumericsError::ShapeMismatch(format!(
            "inner dimensions differ: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(&[m, n]);
    gemm_acc(a.data(), b.data(), out.data_mut(), m, k, n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(a: &[Vec<f32>], b: &[Vec<f32>]) -> Vec<Vec<f32>> {
        let (m, k, n) = (a.len(), b.len(), b[0].len());
        let mut c = vec![vec![0.0f32; n]; m];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0f32;
                for p in 0..k {
                    s += a[i][p] * b[p][j];
                }
                c[i][j] = s;
            }
        }
        c
    }

    #[test]
    fn identity_left_multiplication() {
        let eye = Tensor::from_rows(&[vec![1.0f64, 0.0], vec![0.0, 1.0]]);
        let b = Tensor::from_rows(&[vec![3.0, -1.5, 2.0], vec![0.25, 7.0, -4.0]]);
        assert_eq!(matmul(&eye, &b).unwrap(), b);
    }

    #[test]
    fn one_by_one_product() {
        let a = Tensor::from_rows(&[vec![1.0f64, 2.0]]);
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[2, 3]);
        assert!(matches!(
            matmul(&a, &b),
            Err(NumericsError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(Tensor::<f32>::from_vec(&[0, 3], vec![]).is_err());
        assert!(Tensor::<f32>::from_vec(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn transposed_kernels_agree_with_explicit_transpose() {
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [0.5f64, -1.0, 2.0, 0.0, 1.5, -2.0]; // 2x3
                                                     // aᵀ b : 3x3
        let mut c = vec![0.0; 9];
        gemm_at_b_acc(&a, &b, &mut c, 2, 3, 3);
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let mut expect = vec![0.0; 9];
        gemm_acc(&at, &b, &mut expect, 3, 2, 3);
        assert_eq!(c, expect);
        // a bᵀ : 2x2
        let mut d = vec![0.0; 4];
        gemm_a_bt_acc(&a, &b, &mut d, 2, 3, 2);
        let bt = [0.5, 0.0, -1.0, 1.5, 2.0, -2.0];
        let mut expect = vec![0.0; 4];
        gemm_acc(&a, &bt, &mut expect, 2, 3, 2);
        assert_eq!(d, expect);
    }

    proptest! {
        #[test]
        fn matmul_matches_triple_loop_bitwise(
            a in proptest::collection::vec(-10.0f32..10.0, 12),
            b in proptest::collection::vec(-10.0f32..10.0, 8),
        ) {
            let ar: Vec<Vec<f32>> = a.chunks(4).map(<[f32]>::to_vec).collect();
            let br: Vec<Vec<f32>> = b.chunks(2).map(<[f32]>::to_vec).collect();
            let got = matmul(&Tensor::from_rows(&ar), &Tensor::from_rows(&br)).unwrap();
            let want: Vec<f32> = naive(&ar, &br).into_iter().flatten().collect();
            prop_assert_eq!(got.data(), &want[..]);
        }
    }
}
