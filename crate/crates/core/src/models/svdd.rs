use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::{run_epochs, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::example::{common_dim, squared_distance, Example};
use crate::neural::{Activation, ForwardCache, Gradients, Mlp, OptimizerState};

/// Norm below which the initial representation mean is considered degenerate.
pub const CENTER_DEGENERACY_NORM: f64 = 1e-6;

/// Offset applied along the normalized all-ones direction to a degenerate center.
pub const CENTER_DEGENERACY_OFFSET: f64 = 0.1;

/// One-class deep SVDD: a bias-free mapper and a frozen hypersphere center.
#[derive(Debug, Clone, PartialEq)]
pub struct SvddModel {
    mapper: Mlp,
    center: Option<Vec<f64>>,
    weight_decay: f64,
}

fn check_mapper(mapper: &Mlp) -> Result<()> {
    if !mapper.is_bias_free() {
        return Err(Error::InvalidModel("svdd mapper must not have bias terms".into()));
    }
    if let Some(i) = mapper.layers().iter().position(|l| l.activation().is_bounded_above()) {
        return Err(Error::InvalidModel(format!(
            "svdd mapper layer {i} uses a bounded activation"
        )));
    }
    Ok(())
}

impl SvddModel {
    pub fn new(mapper: Mlp, weight_decay: f64) -> Result<Self> {
        check_mapper(&mapper)?;
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight decay must be nonnegative, got {weight_decay}"
            )));
        }
        Ok(Self {
            mapper,
            center: None,
            weight_decay,
        })
    }

    /// Rebuilds a model with a known center (used when loading from disk).
    pub fn with_center(mapper: Mlp, center: Vec<f64>, weight_decay: f64) -> Result<Self> {
        let mut model = Self::new(mapper, weight_decay)?;
        check_dim("svdd center", model.mapper.output_dim(), center.len())?;
        if let Some(i) = center.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("svdd center[{i}]")));
        }
        model.center = Some(center);
        Ok(model)
    }

    /// ELU hidden layers, linear output, no biases anywhere.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        rep_dim: usize,
        weight_decay: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(rep_dim);
        let mapper = Mlp::random(&dims, Activation::Elu, Activation::Identity, false, rng)?;
        Self::new(mapper, weight_decay)
    }

    pub fn mapper(&self) -> &Mlp {
        &self.mapper
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    pub fn input_dim(&self) -> usize {
        self.mapper.input_dim()
    }

    pub fn center(&self) -> Result<&[f64]> {
        self.center.as_deref().ok_or(Error::CenterUninitialized)
    }

    pub fn is_centered(&self) -> bool {
        self.center.is_some()
    }

    pub fn represent(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.mapper.predict(z)
    }

    /// Squared distance of the representation of `z` to the center.
    pub fn distance_sq(&self, z: &[f64]) -> Result<f64> {
        let c = self.center()?;
        Ok(squared_distance(&self.represent(z)?, c))
    }

    /// Sets the center to the mean representation of `data` under the current
    /// mapper. The center cannot be changed afterwards.
    pub fn init_center(&mut self, data: &[Example]) -> Result<&[f64]> {
        if self.center.is_some() {
            return Err(Error::CenterFrozen);
        }
        let dim = common_dim(data)?;
        check_dim("center data", self.input_dim(), dim)?;
        let mut c = vec![0.0; self.mapper.output_dim()];
        for z in data {
            for (ci, v) in c.iter_mut().zip(self.mapper.predict(z)?) {
                *ci += v;
            }
        }
        let n = data.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < CENTER_DEGENERACY_NORM {
            let step = CENTER_DEGENERACY_OFFSET / (c.len() as f64).sqrt();
            c.iter_mut().for_each(|v| *v += step);
        }
        self.center = Some(c);
        Ok(self.center.as_deref().expect("just set"))
    }

    /// `1/n sum |phi(z_i) - c|^2 + (lambda/2) sum_l |W_l|_F^2`.
    pub fn loss(&self, batch: &[Example]) -> Result<f64> {
        let c = self.center()?;
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut total = 0.0;
        for z in batch {
            total += squared_distance(&self.mapper.predict(z)?, c);
        }
        Ok(total / batch.len() as f64 + 0.5 * self.weight_decay * self.mapper.weight_norm_sq())
    }

    /// Loss and its gradient with respect to the mapper weights.
    ///
    /// With `include_regularizer` false only the distance term is
    /// differentiated (training applies the regularizer as decoupled decay).
    pub fn loss_and_gradients(&self, batch: &[Example], include_regularizer: bool) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(&self.mapper);
        let mut cache = ForwardCache::default();
        let refs: Vec<&Example> = batch.iter().collect();
        let data_term = self.accumulate_distance_gradients(&refs, &mut grads, &mut cache)?;
        let mut loss = data_term / batch.len() as f64;
        if include_regularizer {
            loss += 0.5 * self.weight_decay * self.mapper.weight_norm_sq();
            for (g, l) in grads.layers.iter_mut().zip(self.mapper.layers()) {
                for (gi, w) in g.weights.iter_mut().zip(l.weights()) {
                    *gi += self.weight_decay * w;
                }
            }
        }
        Ok((loss, grads))
    }

    /// Adds the gradient of the batch-mean squared distance into `grads` and
    /// returns the summed (not averaged) squared distance.
    fn accumulate_distance_gradients(
        &self,
        batch: &[&Example],
        grads: &mut Gradients,
        cache: &mut ForwardCache,
    ) -> Result<f64> {
        let c = self.center()?;
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let scale = 2.0 / batch.len() as f64;
        let mut total = 0.0;
        for z in batch {
            self.mapper.forward_with(z, cache)?;
            let out = cache.output();
            total += squared_distance(out, c);
            let dy: Vec<f64> = out.iter().zip(c).map(|(o, ci)| scale * (o - ci)).collect();
            self.mapper.backward_accumulate(cache, &dy, grads)?;
        }
        Ok(total)
    }

    /// Replaces the mapper weights with those of a trained encoder of
    /// identical architecture.
    pub fn copy_encoder_weights(&mut self, encoder: &Mlp) -> Result<()> {
        let same = encoder.dims() == self.mapper.dims()
            && encoder.is_bias_free()
            && encoder
                .layers()
                .iter()
                .zip(self.mapper.layers())
                .all(|(a, b)| a.activation() == b.activation());
        if !same {
            return Err(Error::ArchitectureMismatch(format!(
                "encoder {:?} vs svdd mapper {:?}",
                encoder.dims(),
                self.mapper.dims()
            )));
        }
        if self.center.is_some() {
            return Err(Error::CenterFrozen);
        }
        self.mapper.set_flat_params(&encoder.flat_params())
    }
}

/// Mirror decoder for autoencoder pretraining: reversed widths, ELU hidden
/// layers, linear output, no biases.
pub fn mirror_decoder<R: Rng + ?Sized>(encoder: &Mlp, rng: &mut R) -> Result<Mlp> {
    let mut dims = encoder.dims();
    dims.reverse();
    Mlp::random(&dims, Activation::Elu, Activation::Identity, false, rng)
}

/// Trains a bias-free autoencoder whose encoder mirrors the mapper, copies the
/// encoder into the SVDD, then initializes the center on `data`.
///
/// With `pretrain` false the random mapper is kept and only the center is set.
pub fn pretrain_autoencoder_then_copy(
    mut svdd: SvddModel,
    data: &[Example],
    cfg: &TrainConfig,
    pretrain: bool,
) -> Result<(SvddModel, Vec<f64>)> {
    let mut curve = Vec::new();
    if pretrain {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_a0e0);
        let decoder = mirror_decoder(svdd.mapper(), &mut rng)?;
        let (encoder, _, c) = train_autoencoder(svdd.mapper().clone(), decoder, data, cfg)?;
        svdd.copy_encoder_weights(&encoder)?;
        curve = c;
    }
    svdd.init_center(data)?;
    Ok((svdd, curve))
}

/// Plain squared-error autoencoder training; returns `(encoder, decoder, loss curve)`.
pub fn train_autoencoder(
    mut encoder: Mlp,
    mut decoder: Mlp,
    data: &[Example],
    cfg: &TrainConfig,
) -> Result<(Mlp, Mlp, Vec<f64>)> {
    let dim = common_dim(data)?;
    check_dim("autoencoder input", encoder.input_dim(), dim)?;
    check_dim("autoencoder code", encoder.output_dim(), decoder.input_dim())?;
    check_dim("autoencoder output", dim, decoder.output_dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut enc_opt = OptimizerState::new(&encoder, cfg.learning_rate, 0.0)?;
    let mut dec_opt = OptimizerState::new(&decoder, cfg.learning_rate, 0.0)?;
    let mut enc_grads = Gradients::zeros_like(&encoder);
    let mut dec_grads = Gradients::zeros_like(&decoder);
    let mut enc_cache = ForwardCache::default();
    let mut dec_cache = ForwardCache::default();

    let curve = run_epochs(cfg, data.len(), &mut rng, |lr, batch, _| {
        enc_grads.fill_zero();
        dec_grads.fill_zero();
        let weight = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &i in batch {
            let z = &data[i];
            encoder.forward_with(z, &mut enc_cache)?;
            decoder.forward_with(enc_cache.output(), &mut dec_cache)?;
            let recon = dec_cache.output();
            total += 0.5 * squared_distance(z, recon);
            let dy: Vec<f64> = recon.iter().zip(z.iter()).map(|(r, x)| weight * (r - x)).collect();
            let dcode = decoder.backward_accumulate(&dec_cache, &dy, &mut dec_grads)?;
            encoder.backward_accumulate(&enc_cache, &dcode, &mut enc_grads)?;
        }
        if !total.is_finite() {
            return Ok(total);
        }
        enc_opt.learning_rate = lr;
        dec_opt.learning_rate = lr;
        enc_opt.step(&mut encoder, &enc_grads)?;
        dec_opt.step(&mut decoder, &dec_grads)?;
        Ok(total)
    })?;
    Ok((encoder, decoder, curve))
}

/// Result of SVDD training.
#[derive(Debug, Clone, PartialEq)]
pub struct SvddTraining {
    pub model: SvddModel,
    /// Full objective (distance term plus regularizer) per epoch.
    pub loss_curve: Vec<f64>,
    /// Mean squared distance to the center per epoch.
    pub distance_curve: Vec<f64>,
}

/// Minimizes the one-class objective. The distance term goes through the
/// adaptive-moment update and the Frobenius regularizer is applied as
/// decoupled weight decay with the model's `lambda`. The center never moves.
pub fn train_svdd(mut model: SvddModel, data: &[Example], cfg: &TrainConfig) -> Result<SvddTraining> {
    model.center()?;
    let dim = common_dim(data)?;
    check_dim("training data", model.input_dim(), dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = OptimizerState::new(&model.mapper, cfg.learning_rate, model.weight_decay)?;
    let mut grads = Gradients::zeros_like(&model.mapper);
    let mut cache = ForwardCache::default();
    let mut batch_refs: Vec<&Example> = Vec::with_capacity(cfg.batch_size);

    let mut loss_curve = Vec::with_capacity(cfg.total_epochs());
    let distance_curve = run_epochs(cfg, data.len(), &mut rng, |lr, batch, _| {
        grads.fill_zero();
        batch_refs.clear();
        batch_refs.extend(batch.iter().map(|&i| &data[i]));
        let total = model.accumulate_distance_gradients(&batch_refs, &mut grads, &mut cache)?;
        if !total.is_finite() {
            return Ok(total);
        }
        opt.learning_rate = lr;
        opt.step(&mut model.mapper, &grads)?;
        Ok(total)
    })?;
    for d in &distance_curve {
        // the regularizer is reported at the end-of-training weights
        loss_curve.push(d + 0.5 * model.weight_decay * model.mapper.weight_norm_sq());
    }
    Ok(SvddTraining {
        model,
        loss_curve,
        distance_curve,
    })
}
