use rand::Rng;

use super::{add_column_sums, init, shape_err, LayerError, Param, Parameterized};
use crate::numerics::{gemm_a_bt_acc, gemm_acc, gemm_at_b_acc, Scalar, Tensor};

/// Affine map `x·W + b` with no activation; the loss head applies softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self::from_parts(
            name,
            init::glorot_uniform(rng, inputs, outputs),
            Tensor::zeros(&[outputs]),
        )
        .expect("consistent shapes")
    }

    pub fn from_parts(name: &str, weight: Tensor<F>, bias: Tensor<F>) -> Result<Self, LayerError> {
        let ws = weight.shape();
        if ws.len() != 2 || bias.shape() != [ws[1]] {
            return Err(shape_err(
                "dense",
                format!("weight {ws:?} with bias {:?}", bias.shape()),
            ));
        }
        Ok(Self {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, LayerError> {
        let (inp, out) = (self.inputs(), self.outputs());
        if x.shape().len() != 2 || x.shape()[1] != inp {
            return Err(shape_err(
                "dense",
                format!("input {:?}, expected [B, {inp}]", x.shape()),
            ));
        }
        let batch = x.shape()[0];
        let mut y = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            y.extend_from_slice(self.bias.value.data());
        }
        // Bias first, then products accumulated in ascending input order.
        gemm_acc(x.data(), self.weight.value.data(), &mut y, batch, inp, out);
        Ok(Tensor::from_vec(&[batch, out], y)?)
    }

    /// `x` is the input given to the matching forward call.
    pub fn backward(&mut self, x: &Tensor<F>, d_out: &Tensor<F>) -> Result<Tensor<F>, LayerError> {
        let (inp, out) = (self.inputs(), self.outputs());
        let batch = x.shape()[0];
        if d_out.shape() != [batch, out] {
            return Err(shape_err(
                "dense",
                format!("output gradient {:?}", d_out.shape()),
            ));
        }
        gemm_at_b_acc(
            x.data(),
            d_out.data(),
            self.weight.grad.data_mut(),
            batch,
            inp,
            out,
        );
        add_column_sums(d_out.data(), out, self.bias.grad.data_mut());
        let mut dx = vec![F::zero(); batch * inp];
        gemm_a_bt_acc(
            d_out.data(),
            self.weight.value.data(),
            &mut dx,
            batch,
            out,
            inp,
        );
        Ok(Tensor::from_vec(&[batch, inp], dx)?)
    }
}

impl<F: Scalar> Parameterized<F> for Dense<F> {
    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
