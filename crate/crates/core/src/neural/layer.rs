use rand::Rng;

use super::Activation;
use crate::error::{check_dim, Error, Result};

/// A dense layer computing `activation(W x + b)`.
///
/// Weights are row-major with shape `(out_dim, in_dim)`. A layer built without
/// a bias never acquires one.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Option<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidModel(format!(
                "layer dimensions must be positive ({in_dim}x{out_dim})"
            )));
        }
        check_dim("layer weights", in_dim * out_dim, weights.len())?;
        if let Some(b) = &bias {
            check_dim("layer bias", out_dim, b.len())?;
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn random<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        with_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.random_range(-a..a)).collect();
        let bias = with_bias.then(|| vec![0.0; out_dim]);
        Self::new(in_dim, out_dim, weights, bias, activation)
    }

    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self::new(dim, dim, weights, None, Activation::Identity).expect("square identity layer")
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn has_bias(&self) -> bool {
        self.bias.is_some()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> Option<&mut [f64]> {
        self.bias.as_deref_mut()
    }

    /// Writes the pre-activation `W x + b` into `pre` and the activation into `out`.
    pub(crate) fn forward_into(&self, x: &[f64], pre: &mut Vec<f64>, out: &mut Vec<f64>) {
        pre.clear();
        out.clear();
        for (row, w) in self.weights.chunks_exact(self.in_dim).enumerate() {
            let mut acc = self.bias.as_ref().map_or(0.0, |b| b[row]);
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            pre.push(acc);
            out.push(self.activation.apply(acc));
        }
    }

    pub fn squared_frobenius(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_wrong_shapes() {
        assert!(DenseLayer::new(2, 2, vec![0.0; 3], None, Activation::Identity).is_err());
        assert!(DenseLayer::new(2, 2, vec![0.0; 4], Some(vec![0.0]), Activation::Relu).is_err());
        assert!(DenseLayer::new(0, 2, vec![], None, Activation::Relu).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = DenseLayer::random(10, 6, Activation::Elu, false, &mut rng).unwrap();
        let a = (6.0f64 / 16.0).sqrt();
        assert!(layer.weights().iter().all(|w| w.abs() < a));
        assert!(!layer.has_bias());
        assert_eq!(layer.param_count(), 60);
    }
}
