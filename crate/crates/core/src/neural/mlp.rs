use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::{Activation, DenseLayer};
use crate::error::{check_dim, Error, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// A stack of dense layers.
///
/// Every instance carries an identity and a generation counter that is bumped
/// whenever parameters change; a [`ForwardCache`] remembers both so `backward`
/// can refuse caches taken from another network or from stale parameters.
#[derive(Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    id: u64,
    generation: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Per-layer inputs and pre-activations recorded by [`Mlp::forward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    net_id: u64,
    generation: u64,
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradient (or any parameter-shaped quantity) for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

/// Parameter-shaped buffers matching an [`Mlp`] layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights().len()],
                    bias: l.bias().map(|b| vec![0.0; b.len()]),
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|g| *g = 0.0);
            if let Some(b) = &mut l.bias {
                b.iter_mut().for_each(|g| *g = 0.0);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|g| *g *= factor);
            if let Some(b) = &mut l.bias {
                b.iter_mut().for_each(|g| *g *= factor);
            }
        }
    }

    /// Flattened view in layer order: weights then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            if let Some(b) = &l.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    fn matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.len() == l.weights().len() && g.bias.as_ref().map(Vec::len) == l.bias().map(<[f64]>::len)
            })
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            check_dim("layer chaining", pair[0].out_dim(), pair[1].in_dim())?;
        }
        Ok(Self {
            layers,
            id: fresh_id(),
            generation: 0,
        })
    }

    /// Random network with the given layer widths, `dims[0]` being the input.
    ///
    /// Hidden layers use `hidden`, the last layer uses `output`.
    pub fn random<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        with_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidModel("need at least input and output widths".into()));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                DenseLayer::random(dims[i], dims[i + 1], act, with_bias, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![DenseLayer::identity(dim)]).expect("identity net")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn is_bias_free(&self) -> bool {
        self.layers.iter().all(|l| !l.has_bias())
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseLayer::out_dim))
            .collect()
    }

    /// Sum of squared Frobenius norms of the weight matrices (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().map(DenseLayer::squared_frobenius).sum()
    }

    /// Mutable access to the layers; invalidates outstanding caches.
    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.generation += 1;
        &mut self.layers
    }

    /// Overwrites every parameter from a flat buffer in [`Gradients::flatten`] order.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        check_dim("flat parameters", self.param_count(), flat.len())?;
        let mut offset = 0;
        for l in self.layers_mut() {
            let n = l.weights().len();
            l.weights_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            if let Some(b) = l.bias_mut() {
                let n = b.len();
                b.copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
        }
        Ok(())
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights());
            if let Some(b) = l.bias() {
                out.extend_from_slice(b);
            }
        }
        out
    }

    /// Output only, without recording a cache.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim(), x.len())?;
        let mut cur = x.to_vec();
        let mut pre = Vec::new();
        let mut out = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut pre, &mut out);
            std::mem::swap(&mut cur, &mut out);
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let mut cache = ForwardCache::default();
        self.forward_with(x, &mut cache)?;
        Ok((cache.output().to_vec(), cache))
    }

    /// Forward pass reusing the buffers of an existing cache.
    pub fn forward_with(&self, x: &[f64], cache: &mut ForwardCache) -> Result<()> {
        check_dim("network input", self.input_dim(), x.len())?;
        let n = self.layers.len();
        cache.net_id = self.id;
        cache.generation = self.generation;
        cache.inputs.resize_with(n, Vec::new);
        cache.pre.resize_with(n, Vec::new);
        cache.post.resize_with(n, Vec::new);
        cache.inputs[0].clear();
        cache.inputs[0].extend_from_slice(x);
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cache.inputs[i], &mut cache.pre[i], &mut cache.post[i]);
            if i + 1 < n {
                cache.inputs[i + 1].clear();
                cache.inputs[i + 1].extend_from_slice(&cache.post[i]);
            }
        }
        Ok(())
    }

    /// Gradients of a scalar loss given `dL/dy`; returns `(grads, dL/dx)`.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let dx = self.backward_accumulate(cache, loss_grad, &mut grads)?;
        Ok((grads, dx))
    }

    /// Like [`Mlp::backward`] but adds into `grads`.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        loss_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if cache.net_id != self.id || cache.generation != self.generation || cache.pre.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        if !grads.matches(self) {
            return Err(Error::InvalidArgument(
                "gradient buffer does not match the network".into(),
            ));
        }
        check_dim("loss gradient", self.output_dim(), loss_grad.len())?;

        let mut upstream = loss_grad.to_vec();
        let mut delta = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation();
            delta.clear();
            delta.extend(
                upstream
                    .iter()
                    .zip(&cache.pre[i])
                    .zip(&cache.post[i])
                    .map(|((g, &x), &y)| g * act.derivative(x, y)),
            );
            let input = &cache.inputs[i];
            let g = &mut grads.layers[i];
            let in_dim = layer.in_dim();
            for (row, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let gw = &mut g.weights[row * in_dim..(row + 1) * in_dim];
                for (gwi, xi) in gw.iter_mut().zip(input) {
                    *gwi += d * xi;
                }
            }
            if let Some(gb) = &mut g.bias {
                for (gbi, d) in gb.iter_mut().zip(&delta) {
                    *gbi += d;
                }
            }
            let mut down = vec![0.0; in_dim];
            for (row, w) in layer.weights().chunks_exact(in_dim).enumerate() {
                let d = delta[row];
                if d == 0.0 {
                    continue;
                }
                for (di, wi) in down.iter_mut().zip(w) {
                    *di += d * wi;
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }
}
