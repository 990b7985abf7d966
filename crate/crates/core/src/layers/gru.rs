//! Reset-after GRU.
//!
//! Kernels are stored with gate blocks in the order update (z), reset (r),
//! candidate (h̃):
//!
//! ```text
//! z  = σ(x·W_z + b_xz + h·U_z + b_hz)
//! r  = σ(x·W_r + b_xr + h·U_r + b_hr)
//! h̃  = tanh(x·W_h + b_xh + r ⊙ (h·U_h + b_hh))
//! h' = z ⊙ h + (1 − z) ⊙ h̃
//! ```

use rand::Rng;

use super::{add_column_sums, init, shape_err, LayerError, Param, Parameterized};
use crate::numerics::{gemm_a_bt_acc, gemm_acc, gemm_at_b_acc, sigmoid_scalar, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GruCell<F> {
    pub input_kernel: Param<F>,
    pub recurrent_kernel: Param<F>,
    pub input_bias: Param<F>,
    pub recurrent_bias: Param<F>,
    input_dim: usize,
    hidden: usize,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruCache<F> {
    x: Vec<F>,
    batch: usize,
    steps: usize,
    /// `[T][B][h]` blocks.
    h_prev: Vec<F>,
    z: Vec<F>,
    r: Vec<F>,
    /// `h·U_h + b_hh`, the recurrent candidate term before the reset gate.
    rec_cand: Vec<F>,
    cand: Vec<F>,
}

impl<F: Scalar> GruCell<F> {
    /// Glorot-uniform input kernel, orthogonal recurrent kernel, zero biases.
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let input_kernel = init::glorot_uniform(rng, input_dim, 3 * hidden);
        let recurrent_kernel = init::orthogonal(rng, hidden, 3 * hidden);
        Self::from_parts(
            name,
            input_kernel,
            recurrent_kernel,
            Tensor::zeros(&[3 * hidden]),
            Tensor::zeros(&[3 * hidden]),
        )
        .expect("consistent shapes")
    }

    pub fn from_parts(
        name: &str,
        input_kernel: Tensor<F>,
        recurrent_kernel: Tensor<F>,
        input_bias: Tensor<F>,
        recurrent_bias: Tensor<F>,
    ) -> Result<Self, LayerError> {
        let ks = input_kernel.shape();
        if ks.len() != 2 || !ks[1].is_multiple_of(3) {
            return Err(shape_err("gru", format!("input kernel shape {ks:?}")));
        }
        let (input_dim, hidden) = (ks[0], ks[1] / 3);
        if recurrent_kernel.shape() != [hidden, 3 * hidden]
            || input_bias.shape() != [3 * hidden]
            || recurrent_bias.shape() != [3 * hidden]
        {
            return Err(shape_err(
                "gru",
                format!(
                    "recurrent kernel {:?}, biases {:?}/{:?} for hidden size {hidden}",
                    recurrent_kernel.shape(),
                    input_bias.shape(),
                    recurrent_bias.shape()
                ),
            ));
        }
        Ok(Self {
            input_kernel: Param::new(format!("{name}.input_kernel"), input_kernel),
            recurrent_kernel: Param::new(format!("{name}.recurrent_kernel"), recurrent_kernel),
            input_bias: Param::new(format!("{name}.input_bias"), input_bias),
            recurrent_bias: Param::new(format!("{name}.recurrent_bias"), recurrent_bias),
            input_dim,
            hidden,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    /// One step on a `[B, x]` input and `[B, h]` state.
    pub fn step(&self, x_t: &Tensor<F>, h_prev: &Tensor<F>) -> Result<Tensor<F>, LayerError> {
        if x_t.shape().len() != 2 || x_t.shape()[1] != self.input_dim {
            return Err(shape_err("gru", format!("step input {:?}", x_t.shape())));
        }
        let batch = x_t.shape()[0];
        if h_prev.shape() != [batch, self.hidden] {
            return Err(shape_err("gru", format!("step state {:?}", h_prev.shape())));
        }
        let x3 = Tensor::from_vec(&[batch, 1, self.input_dim], x_t.data().to_vec())?;
        let (states, _) = self.run(&x3, Some(h_prev))?;
        Ok(Tensor::from_vec(&[batch, self.hidden], states)?)
    }

    /// Runs the cell over `[B, T, x]` and returns every state as `[B, T, h]`.
    pub fn forward_sequence(
        &self,
        x: &Tensor<F>,
        h0: Option<&Tensor<F>>,
    ) -> Result<(Tensor<F>, GruCache<F>), LayerError> {
        let (states, cache) = self.run(x, h0)?;
        let out = Tensor::from_vec(&[cache.batch, cache.steps, self.hidden], states)?;
        Ok((out, cache))
    }

    fn run(
        &self,
        x: &Tensor<F>,
        h0: Option<&Tensor<F>>,
    ) -> Result<(Vec<F>, GruCache<F>), LayerError> {
        let shape = x.shape();
        if shape.len() != 3 {
            return Err(shape_err(
                "gru",
                format!("expected [B, T, x], got {shape:?}"),
            ));
        }
        let (batch, steps, xdim) = (shape[0], shape[1], shape[2]);
        if steps == 0 {
            return Err(LayerError::EmptySequence);
        }
        if xdim != self.input_dim {
            return Err(shape_err(
                "gru",
                format!("input width {xdim}, cell expects {}", self.input_dim),
            ));
        }
        let h = self.hidden;
        let g = 3 * h;

        let mut h_cur = match h0 {
            Some(t) if t.shape() != [batch, h] => {
                return Err(shape_err("gru", format!("initial state {:?}", t.shape())))
            }
            Some(t) => t.data().to_vec(),
            None => vec![F::zero(); batch * h],
        };

        // Input projections for every (b, t) row at once.
        let mut xw = vec![F::zero(); batch * steps * g];
        gemm_acc(
            x.data(),
            self.input_kernel.value.data(),
            &mut xw,
            batch * steps,
            xdim,
            g,
        );
        let bx = self.input_bias.value.data();
        for row in xw.chunks_mut(g) {
            for (v, &b) in row.iter_mut().zip(bx) {
                *v += b;
            }
        }

        let block = batch * h;
        let mut cache = GruCache {
            x: x.data().to_vec(),
            batch,
            steps,
            h_prev: vec![F::zero(); steps * block],
            z: vec![F::zero(); steps * block],
            r: vec![F::zero(); steps * block],
            rec_cand: vec![F::zero(); steps * block],
            cand: vec![F::zero(); steps * block],
        };
        let mut states = vec![F::zero(); batch * steps * h];
        let bh = self.recurrent_bias.value.data();
        let u = self.recurrent_kernel.value.data();
        let mut hu = vec![F::zero(); batch * g];

        for t in 0..steps {
            let off = t * block;
            cache.h_prev[off..off + block].copy_from_slice(&h_cur);

            for row in hu.chunks_mut(g) {
                row.copy_from_slice(bh);
            }
            gemm_acc(&h_cur, u, &mut hu, batch, h, g);

            for b in 0..batch {
                let xw_row = &xw[(b * steps + t) * g..(b * steps + t + 1) * g];
                let hu_row = &hu[b * g..(b + 1) * g];
                for j in 0..h {
                    let z = sigmoid_scalar(xw_row[j] + hu_row[j]);
                    let r = sigmoid_scalar(xw_row[h + j] + hu_row[h + j]);
                    let rc = hu_row[2 * h + j];
                    let cand = (xw_row[2 * h + j] + r * rc).tanh();
                    let i = b * h + j;
                    let hp = h_cur[i];
                    let hn = z * hp + (F::one() - z) * cand;
                    cache.z[off + i] = z;
                    cache.r[off + i] = r;
                    cache.rec_cand[off + i] = rc;
                    cache.cand[off + i] = cand;
                    h_cur[i] = hn;
                    states[(b * steps + t) * h + j] = hn;
                }
            }
        }
        Ok((states, cache))
    }

    /// Full backpropagation through time.
    ///
    /// `d_states` is the upstream gradient for every output state, `[B, T, h]`.
    /// Parameter gradients are accumulated; the input gradient `[B, T, x]` is
    /// returned.
    pub fn backward_sequence(
        &mut self,
        cache: &GruCache<F>,
        d_states: &Tensor<F>,
    ) -> Result<Tensor<F>, LayerError> {
        let (batch, steps, h) = (cache.batch, cache.steps, self.hidden);
        if d_states.shape() != [batch, steps, h] {
            return Err(shape_err(
                "gru",
                format!(
                    "state gradient {:?}, expected {:?}",
                    d_states.shape(),
                    [batch, steps, h]
                ),
            ));
        }
        let g = 3 * h;
        let xdim = self.input_dim;
        let block = batch * h;
        let ds = d_states.data();

        let mut dxw = vec![F::zero(); batch * steps * g];
        let mut dh_next = vec![F::zero(); block];
        let mut dhu = vec![F::zero(); batch * g];
        let mut du = vec![F::zero(); h * g];
        let mut dbh = vec![F::zero(); g];

        for t in (0..steps).rev() {
            let off = t * block;
            let mut dh_prev = vec![F::zero(); block];
            for b in 0..batch {
                let dxw_row = &mut dxw[(b * steps + t) * g..(b * steps + t + 1) * g];
                let dhu_row = &mut dhu[b * g..(b + 1) * g];
                for j in 0..h {
                    let i = b * h + j;
                    let dh = ds[(b * steps + t) * h + j] + dh_next[i];
                    let z = cache.z[off + i];
                    let r = cache.r[off + i];
                    let cand = cache.cand[off + i];
                    let hp = cache.h_prev[off + i];
                    let rc = cache.rec_cand[off + i];

                    let d_cand_pre = dh * (F::one() - z) * (F::one() - cand * cand);
                    let dz_pre = dh * (hp - cand) * z * (F::one() - z);
                    let dr_pre = d_cand_pre * rc * r * (F::one() - r);

                    dxw_row[j] = dz_pre;
                    dxw_row[h + j] = dr_pre;
                    dxw_row[2 * h + j] = d_cand_pre;
                    dhu_row[j] = dz_pre;
                    dhu_row[h + j] = dr_pre;
                    dhu_row[2 * h + j] = d_cand_pre * r;
                    dh_prev[i] = dh * z;
                }
            }
            gemm_at_b_acc(&cache.h_prev[off..off + block], &dhu, &mut du, batch, h, g);
            add_column_sums(&dhu, g, &mut dbh);
            gemm_a_bt_acc(
                &dhu,
                self.recurrent_kernel.value.data(),
                &mut dh_prev,
                batch,
                g,
                h,
            );
            dh_next = dh_prev;
        }

        for (a, d) in self.recurrent_kernel.grad.data_mut().iter_mut().zip(&du) {
            *a += *d;
        }
        for (a, d) in self.recurrent_bias.grad.data_mut().iter_mut().zip(&dbh) {
            *a += *d;
        }
        gemm_at_b_acc(
            &cache.x,
            &dxw,
            self.input_kernel.grad.data_mut(),
            batch * steps,
            xdim,
            g,
        );
        add_column_sums(&dxw, g, self.input_bias.grad.data_mut());

        let mut dx = vec![F::zero(); batch * steps * xdim];
        gemm_a_bt_acc(
            &dxw,
            self.input_kernel.value.data(),
            &mut dx,
            batch * steps,
            g,
            xdim,
        );
        Ok(Tensor::from_vec(&[batch, steps, xdim], dx)?)
    }
}

impl<F: Scalar> Parameterized<F> for GruCell<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![
            &self.input_kernel,
            &self.recurrent_kernel,
            &self.input_bias,
            &self.recurrent_bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![
            &mut self.input_kernel,
            &mut self.recurrent_kernel,
            &mut self.input_bias,
            &mut self.recurrent_bias,
        ]
    }

    /// `3h(x + h + 2)`.
    fn param_count(&self) -> usize {
        3 * self.hidden * (self.input_dim + self.hidden + 2)
    }
}

/// Runs `cell` over `[B, T, x]` from `h0` (zeros when `None`). Returns
/// `[B, T, h]` when `return_sequences`, otherwise the final state `[B, h]`.
pub fn gru_sequence_forward<F: Scalar>(
    x: &Tensor<F>,
    cell: &GruCell<F>,
    return_sequences: bool,
    h0: Option<&Tensor<F>>,
) -> Result<Tensor<F>, LayerError> {
    let (states, cache) = cell.forward_sequence(x, h0)?;
    if return_sequences {
        return Ok(states);
    }
    let (batch, steps, h) = (cache.batch, cache.steps, cell.hidden_size());
    let last = states
        .data()
        .chunks(steps * h)
        .flat_map(|seq| seq[(steps - 1) * h..].iter().copied())
        .collect();
    Ok(Tensor::from_vec(&[batch, h], last)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::testutil::{check_layer, random_tensor, weighted_sum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scalar-loop oracle; unrelated to the batched kernels above.
    fn oracle_step(cell: &GruCell<f64>, x: &[f64], h: &[f64]) -> Vec<f64> {
        let n = cell.hidden_size();
        let w = &cell.input_kernel.value;
        let u = &cell.recurrent_kernel.value;
        let bx = cell.input_bias.value.data();
        let bh = cell.recurrent_bias.value.data();
        let proj = |m: &Tensor<f64>, v: &[f64], col: usize| -> f64 {
            v.iter().enumerate().map(|(i, vi)| vi * m.at2(i, col)).sum()
        };
        (0..n)
            .map(|j| {
                let sig = |a: f64| 1.0 / (1.0 + (-a).exp());
                let z = sig(proj(w, x, j) + bx[j] + proj(u, h, j) + bh[j]);
                let r = sig(proj(w, x, n + j) + bx[n + j] + proj(u, h, n + j) + bh[n + j]);
                let c = (proj(w, x, 2 * n + j)
                    + bx[2 * n + j]
                    + r * (proj(u, h, 2 * n + j) + bh[2 * n + j]))
                    .tanh();
                z * h[j] + (1.0 - z) * c
            })
            .collect()
    }

    fn random_cell(rng: &mut ChaCha8Rng, x: usize, h: usize) -> GruCell<f64> {
        GruCell::from_parts(
            "cell",
            random_tensor(rng, &[x, 3 * h], 0.8),
            random_tensor(rng, &[h, 3 * h], 0.8),
            random_tensor(rng, &[3 * h], 0.5),
            random_tensor(rng, &[3 * h], 0.5),
        )
        .unwrap()
    }

    fn zero_cell(x: usize, h: usize) -> GruCell<f64> {
        GruCell::from_parts(
            "zero",
            Tensor::zeros(&[x, 3 * h]),
            Tensor::zeros(&[h, 3 * h]),
            Tensor::zeros(&[3 * h]),
            Tensor::zeros(&[3 * h]),
        )
        .unwrap()
    }

    #[test]
    fn zero_parameters_halve_the_state() {
        let cell = zero_cell(2, 3);
        let x = Tensor::from_vec(&[1, 2], vec![4.0, -7.0]).unwrap();
        let h = Tensor::from_vec(&[1, 3], vec![0.6, -0.2, 1.0]).unwrap();
        let out = cell.step(&x, &h).unwrap();
        assert_eq!(out.data(), &[0.3, -0.1, 0.5]);
    }

    #[test]
    fn bias_only_step_has_closed_form() {
        // h_prev = 0, x = 0: z = σ(bxz + bhz), r = σ(bxr + bhr),
        // h̃ = tanh(bxh + r·bhh), h = (1 − z)·h̃.
        let bx = Tensor::from_vec(&[3], vec![0.4, -0.3, 0.7]).unwrap();
        let bh = Tensor::from_vec(&[3], vec![0.1, 0.9, -0.5]).unwrap();
        let cell = GruCell::from_parts("b", Tensor::zeros(&[2, 3]), Tensor::zeros(&[1, 3]), bx, bh)
            .unwrap();
        let sig = |a: f64| 1.0 / (1.0 + (-a).exp());
        let z = sig(0.5);
        let r = sig(0.6);
        let cand = (0.7 + r * -0.5f64).tanh();
        let want = (1.0 - z) * cand;
        let out = cell
            .step(&Tensor::zeros(&[1, 2]), &Tensor::zeros(&[1, 1]))
            .unwrap();
        assert!((out.data()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn step_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cell = random_cell(&mut rng, 2, 3);
        let x = random_tensor(&mut rng, &[2, 2], 1.0);
        let h = random_tensor(&mut rng, &[2, 3], 0.9);
        let got = cell.step(&x, &h).unwrap();
        for b in 0..2 {
            let want = oracle_step(
                &cell,
                &x.data()[b * 2..b * 2 + 2],
                &h.data()[b * 3..b * 3 + 3],
            );
            for j in 0..3 {
                assert!((got.at2(b, j) - want[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_step_sequence_equals_cell_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cell = random_cell(&mut rng, 3, 2);
        let x = random_tensor(&mut rng, &[2, 1, 3], 1.0);
        let seq = gru_sequence_forward(&x, &cell, false, None).unwrap();
        let step = cell
            .step(
                &x.clone().reshape(&[2, 3]).unwrap(),
                &Tensor::zeros(&[2, 2]),
            )
            .unwrap();
        assert_eq!(seq, step);
    }

    #[test]
    fn zero_parameters_from_zero_state_stay_zero() {
        let cell = zero_cell(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_tensor(&mut rng, &[3, 6, 2], 5.0);
        let out = gru_sequence_forward(&x, &cell, true, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sequence_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cell = random_cell(&mut rng, 2, 2);
        let x = random_tensor(&mut rng, &[1, 3, 2], 1.0);
        let out = gru_sequence_forward(&x, &cell, true, None).unwrap();
        let mut h = vec![0.0; 2];
        for t in 0..3 {
            h = oracle_step(&cell, &x.data()[t * 2..t * 2 + 2], &h);
            for j in 0..2 {
                assert!((out.data()[t * 2 + j] - h[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn empty_sequence_and_bad_width_are_rejected() {
        let cell = zero_cell(2, 2);
        let bad = Tensor::<f64>::zeros(&[1, 2, 3]);
        assert!(matches!(
            gru_sequence_forward(&bad, &cell, true, None),
            Err(LayerError::Shape { .. })
        ));
        let h0 = Tensor::<f64>::zeros(&[2, 2]);
        let x = Tensor::<f64>::zeros(&[1, 2, 2]);
        assert!(gru_sequence_forward(&x, &cell, true, Some(&h0)).is_err());
    }

    #[test]
    fn parameter_counts_match_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            GruCell::<f32>::new("a", 50, 120, &mut rng).param_count(),
            61_920
        );
        assert_eq!(
            GruCell::<f32>::new("b", 240, 64, &mut rng).param_count(),
            58_752
        );
        assert_eq!(
            GruCell::<f32>::new("c", 128, 64, &mut rng).param_count(),
            37_248
        );
    }

    #[test]
    fn hidden_states_stay_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cell = random_cell(&mut rng, 3, 5);
        let x = random_tensor(&mut rng, &[4, 30, 3], 20.0);
        let out = gru_sequence_forward(&x, &cell, true, None).unwrap();
        assert!(out.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn backward_through_time_passes_grad_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cell = random_cell(&mut rng, 3, 4);
        let x = random_tensor(&mut rng, &[2, 5, 3], 1.0);
        let w = random_tensor(&mut rng, &[2, 5, 4], 1.0);

        let mut with_grads = cell.clone();
        let (_, cache) = with_grads.forward_sequence(&x, None).unwrap();
        let dx = with_grads.backward_sequence(&cache, &w).unwrap();

        let report = check_layer(
            &cell,
            &x,
            |c, x| weighted_sum(&c.forward_sequence(x, None).unwrap().0, &w),
            &with_grads,
            &dx,
        );
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}
