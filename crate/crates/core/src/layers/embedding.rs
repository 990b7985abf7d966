use rand::Rng;

use super::{init, shape_err, LayerError, Param, Parameterized};
use crate::numerics::{Scalar, Tensor};

/// Lookup table from token id to a dense row.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<F> {
    pub weight: Param<F>,
}

impl<F: Scalar> Embedding<F> {
    /// Rows drawn uniformly from ±0.05.
    pub fn new<R: Rng + ?Sized>(name: &str, vocab: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                init::uniform(rng, &[vocab, dim], 0.05),
            ),
        }
    }

    pub fn from_weight(name: &str, weight: Tensor<F>) -> Result<Self, LayerError> {
        if weight.shape().len() != 2 {
            return Err(shape_err(
                "embedding",
                format!("weight shape {:?}", weight.shape()),
            ));
        }
        Ok(Self {
            weight: Param::new(format!("{name}.weight"), weight),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), LayerError> {
        let vocab = self.vocab_size();
        match ids.iter().find(|&&id| id as usize >= vocab) {
            Some(&id) => Err(LayerError::IdOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    /// `ids` is a row-major `[batch, steps]` block; returns `[batch, steps, dim]`.
    pub fn forward(
        &self,
        ids: &[u32],
        batch: usize,
        steps: usize,
    ) -> Result<Tensor<F>, LayerError> {
        if ids.len() != batch * steps || batch == 0 || steps == 0 {
            return Err(shape_err(
                "embedding",
                format!("{} ids for batch {batch} x steps {steps}", ids.len()),
            ));
        }
        self.check_ids(ids)?;
        let dim = self.dim();
        let table = self.weight.value.data();
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            let row = id as usize * dim;
            out.extend_from_slice(&table[row..row + dim]);
        }
        Ok(Tensor::from_vec(&[batch, steps, dim], out)?)
    }

    /// Scatter-adds `d_out` rows into the referenced weight rows only.
    pub fn backward(&mut self, ids: &[u32], d_out: &Tensor<F>) -> Result<(), LayerError> {
        let dim = self.dim();
        if d_out.len() != ids.len() * dim {
            return Err(shape_err(
                "embedding",
                format!("gradient {:?} for {} ids", d_out.shape(), ids.len()),
            ));
        }
        self.check_ids(ids)?;
        let grad = self.weight.grad.data_mut();
        for (&id, g) in ids.iter().zip(d_out.data().chunks(dim)) {
            let row = id as usize * dim;
            for (a, &b) in grad[row..row + dim].iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(())
    }
}

impl<F: Scalar> Parameterized<F> for Embedding<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.weight]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight]
    }

    fn param_count(&self) -> usize {
        self.weight.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pad_ids_copy_row_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let emb: Embedding<f32> = Embedding::new("e", 10, 4, &mut rng);
        let out = emb.forward(&[0; 6], 2, 3).unwrap();
        let row0 = &emb.weight.value.data()[..4];
        for chunk in out.data().chunks(4) {
            assert_eq!(chunk, row0);
        }
    }

    #[test]
    fn repeated_token_accumulates_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut emb: Embedding<f64> = Embedding::new("e", 6, 3, &mut rng);
        let ids = [4, 2, 4];
        emb.backward(&ids, &Tensor::filled(&[1, 3, 3], 1.0))
            .unwrap();
        let g = emb.weight.grad.data();
        assert_eq!(&g[12..15], &[2.0, 2.0, 2.0]);
        assert_eq!(&g[6..9], &[1.0, 1.0, 1.0]);
        let untouched: f64 = [0, 1, 3, 5].iter().flat_map(|r| &g[r * 3..r * 3 + 3]).sum();
        assert_eq!(untouched, 0.0);
    }

    #[test]
    fn out_of_range_id_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let emb: Embedding<f32> = Embedding::new("e", 5, 2, &mut rng);
        assert_eq!(
            emb.forward(&[1, 5], 1, 2),
            Err(LayerError::IdOutOfRange { id: 5, vocab: 5 })
        );
    }

    #[test]
    fn paper_table_size() {
        let emb = Embedding::<f32>::from_weight("e", Tensor::zeros(&[50_000, 50])).unwrap();
        assert_eq!(emb.param_count(), 2_500_000);
    }
}
