use rand::Rng;

use super::{shape_err, GruCache, GruCell, LayerError, Param, Parameterized};
use crate::numerics::{Scalar, Tensor};

/// Forward and time-reversed GRU passes concatenated on the feature axis.
///
/// With `return_sequences` the output is `[B, T, 2h]`, the backward half
/// re-aligned to forward time. Otherwise it is `[B, 2h]`: the forward
/// state at `t = T−1` next to the backward cell's own final state, which
/// sits at aligned `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirectionalGru<F> {
    pub forward: GruCell<F>,
    pub backward: GruCell<F>,
    return_sequences: bool,
}

#[derive(Debug, Clone)]
pub struct BidirectionalCache<F> {
    forward: GruCache<F>,
    backward: GruCache<F>,
    batch: usize,
    steps: usize,
}

/// Reverses the time axis of a `[B, T, C]` tensor.
pub fn reverse_time<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let shape = x.shape();
    assert_eq!(shape.len(), 3, "reverse_time expects [B, T, C]");
    let (steps, width) = (shape[1], shape[2]);
    let mut out = Vec::with_capacity(x.len());
    for seq in x.data().chunks(steps * width) {
        for frame in seq.chunks(width).rev() {
            out.extend_from_slice(frame);
        }
    }
    Tensor::from_vec(shape, out).expect("same shape")
}

impl<F: Scalar> BidirectionalGru<F> {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        input_dim: usize,
        hidden: usize,
        return_sequences: bool,
        rng: &mut R,
    ) -> Self {
        let forward = GruCell::new(&format!("{name}.forward"), input_dim, hidden, rng);
        let backward = GruCell::new(&format!("{name}.backward"), input_dim, hidden, rng);
        Self {
            forward,
            backward,
            return_sequences,
        }
    }

    pub fn from_cells(
        forward: GruCell<F>,
        backward: GruCell<F>,
        return_sequences: bool,
    ) -> Result<Self, LayerError> {
        if forward.hidden_size() != backward.hidden_size()
            || forward.input_dim() != backward.input_dim()
        {
            return Err(shape_err(
                "bidirectional",
                format!(
                    "cells disagree: {}->{} vs {}->{}",
                    forward.input_dim(),
                    forward.hidden_size(),
                    backward.input_dim(),
                    backward.hidden_size()
                ),
            ));
        }
        Ok(Self {
            forward,
            backward,
            return_sequences,
        })
    }

    pub fn return_sequences(&self) -> bool {
        self.return_sequences
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size()
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn output_width(&self) -> usize {
        2 * self.hidden_size()
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, BidirectionalCache<F>), LayerError> {
        let (fwd_states, fwd_cache) = self.forward.forward_sequence(x, None)?;
        let (bwd_states_rev, bwd_cache) = self.backward.forward_sequence(&reverse_time(x), None)?;
        let (batch, steps) = (x.shape()[0], x.shape()[1]);
        let h = self.hidden_size();

        let out = if self.return_sequences {
            let bwd_states = reverse_time(&bwd_states_rev);
            let mut data = Vec::with_capacity(batch * steps * 2 * h);
            for (f, b) in fwd_states.data().chunks(h).zip(bwd_states.data().chunks(h)) {
                data.extend_from_slice(f);
                data.extend_from_slice(b);
            }
            Tensor::from_vec(&[batch, steps, 2 * h], data)?
        } else {
            let mut data = Vec::with_capacity(batch * 2 * h);
            let last = (steps - 1) * h;
            for (f, b) in fwd_states
                .data()
                .chunks(steps * h)
                .zip(bwd_states_rev.data().chunks(steps * h))
            {
                data.extend_from_slice(&f[last..]);
                data.extend_from_slice(&b[last..]);
            }
            Tensor::from_vec(&[batch, 2 * h], data)?
        };
        let cache = BidirectionalCache {
            forward: fwd_cache,
            backward: bwd_cache,
            batch,
            steps,
        };
        Ok((out, cache))
    }

    pub fn backward(
        &mut self,
        cache: &BidirectionalCache<F>,
        d_out: &Tensor<F>,
    ) -> Result<Tensor<F>, LayerError> {
        let (batch, steps, h) = (cache.batch, cache.steps, self.hidden_size());
        let expected: Vec<usize> = if self.return_sequences {
            vec![batch, steps, 2 * h]
        } else {
            vec![batch, 2 * h]
        };
        if d_out.shape() != expected.as_slice() {
            return Err(shape_err(
                "bidirectional",
                format!("output gradient {:?}, expected {expected:?}", d_out.shape()),
            ));
        }

        let mut d_fwd = Tensor::zeros(&[batch, steps, h]);
        // Gradient for the backward cell, in its own (reversed) time frame.
        let mut d_bwd_rev = Tensor::zeros(&[batch, steps, h]);
        if self.return_sequences {
            let df = d_fwd.data_mut();
            let mut d_bwd = vec![F::zero(); batch * steps * h];
            for (i, frame) in d_out.data().chunks(2 * h).enumerate() {
                df[i * h..(i + 1) * h].copy_from_slice(&frame[..h]);
                d_bwd[i * h..(i + 1) * h].copy_from_slice(&frame[h..]);
            }
            d_bwd_rev = reverse_time(&Tensor::from_vec(&[batch, steps, h], d_bwd)?);
        } else {
            let last = (steps - 1) * h;
            for (b, frame) in d_out.data().chunks(2 * h).enumerate() {
                let base = b * steps * h + last;
                d_fwd.data_mut()[base..base + h].copy_from_slice(&frame[..h]);
                d_bwd_rev.data_mut()[base..base + h].copy_from_slice(&frame[h..]);
            }
        }

        let dx_fwd = self.forward.backward_sequence(&cache.forward, &d_fwd)?;
        let dx_bwd = reverse_time(
            &self
                .backward
                .backward_sequence(&cache.backward, &d_bwd_rev)?,
        );
        let mut dx = dx_fwd;
        for (a, b) in dx.data_mut().iter_mut().zip(dx_bwd.data()) {
            *a += *b;
        }
        Ok(dx)
    }
}

impl<F: Scalar> Parameterized<F> for BidirectionalGru<F> {
    fn params(&self) -> Vec<&Param<F>> {
        let mut v = self.forward.params();
        v.extend(self.backward.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut v = self.forward.params_mut();
        v.extend(self.backward.params_mut());
        v
    }

    fn param_count(&self) -> usize {
        self.forward.param_count() + self.backward.param_count()
    }
}
