use super::{Gradients, Mlp};
use crate::error::{Error, Result};

/// Adaptive-moment optimizer with decoupled weight decay on weight matrices.
///
/// Biases (when present) are never decayed.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first: Gradients,
    second: Gradients,
}

impl OptimizerState {
    pub fn new(net: &Mlp, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be nonnegative, got {weight_decay}"
            )));
        }
        Ok(Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to `net`. Rejects non-finite gradients before touching
    /// any parameter.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != self.first.layers.len() {
            return Err(Error::InvalidArgument(
                "gradient shape does not match optimizer state".into(),
            ));
        }
        for (li, (g, m)) in grads.layers.iter().zip(&self.first.layers).enumerate() {
            if g.weights.len() != m.weights.len() || g.bias.as_ref().map(Vec::len) != m.bias.as_ref().map(Vec::len) {
                return Err(Error::InvalidArgument(format!("gradient shape mismatch at layer {li}")));
            }
            if let Some(i) = g.weights.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("layer {li} weights[{i}]")));
            }
            if let Some(i) = g.bias.as_ref().and_then(|b| b.iter().position(|v| !v.is_finite())) {
                return Err(Error::NonFiniteGradient(format!("layer {li} bias[{i}]")));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (lr, b1, b2, eps) = (self.learning_rate, self.beta1, self.beta2, self.eps);
        let decay = 1.0 - lr * self.weight_decay;

        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], decay: f64| {
            for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi = *pi * decay - lr * mhat / (vhat.sqrt() + eps);
            }
        };

        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            update(layer.weights_mut(), &g.weights, &mut m.weights, &mut v.weights, decay);
            if let (Some(p), Some(gb), Some(mb), Some(vb)) = (layer.bias_mut(), &g.bias, &mut m.bias, &mut v.bias) {
                update(p, gb, mb, vb, 1.0);
            }
        }
        Ok(())
    }
}
