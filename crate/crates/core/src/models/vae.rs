use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::train::{run_epochs, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::example::{common_dim, squared_distance, Example};
use crate::neural::{Activation, ForwardCache, Gradients, Mlp, OptimizerState};

/// Variational autoencoder with a diagonal-Gaussian encoder and a unit-variance
/// Gaussian decoder.
///
/// The encoder emits `2d` values: the latent mean followed by the latent
/// log-variance.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    encoder: Mlp,
    decoder: Mlp,
    latent_dim: usize,
}

/// Loss of one example, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Closed-form `KL(N(mu, diag(exp(logvar))) || N(0, I))`.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

impl VaeModel {
    pub fn new(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        if encoder.output_dim() % 2 != 0 {
            return Err(Error::InvalidModel(format!(
                "encoder output must be 2 x latent dim, got {}",
                encoder.output_dim()
            )));
        }
        let latent_dim = encoder.output_dim() / 2;
        check_dim("decoder input (latent dim)", latent_dim, decoder.input_dim())?;
        check_dim("decoder output (input dim)", encoder.input_dim(), decoder.output_dim())?;
        Ok(Self {
            encoder,
            decoder,
            latent_dim,
        })
    }

    /// ELU hidden layers of the given widths, mirrored in the decoder.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], latent_dim: usize, rng: &mut R) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::InvalidModel("latent dimension must be positive".into()));
        }
        let mut enc_dims = vec![input_dim];
        enc_dims.extend_from_slice(hidden);
        enc_dims.push(2 * latent_dim);
        let mut dec_dims = vec![latent_dim];
        dec_dims.extend(hidden.iter().rev());
        dec_dims.push(input_dim);
        let encoder = Mlp::random(&enc_dims, Activation::Elu, Activation::Identity, true, rng)?;
        let decoder = Mlp::random(&dec_dims, Activation::Elu, Activation::Identity, true, rng)?;
        Self::new(encoder, decoder)
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Latent mean and log-variance.
    pub fn encode(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut out = self.encoder.predict(z)?;
        let logvar = out.split_off(self.latent_dim);
        Ok((out, logvar))
    }

    pub fn decode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.predict(x)
    }

    /// Noise-free reconstruction `decoder(mu)`.
    pub fn reconstruct_mean(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (mu, _) = self.encode(z)?;
        self.decode(&mu)
    }

    /// `n` reconstructions `decoder(mu + sigma * noise_k)` with independent noise.
    pub fn sample_reconstructions<R: Rng + ?Sized>(&self, z: &[f64], n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let (mu, logvar) = self.encode(z)?;
        let sigma = checked_sigma(&logvar)?;
        let mut latent = vec![0.0; self.latent_dim];
        (0..n)
            .map(|_| {
                for ((x, m), s) in latent.iter_mut().zip(&mu).zip(&sigma) {
                    let e: f64 = rng.sample(StandardNormal);
                    *x = m + s * e;
                }
                self.decode(&latent)
            })
            .collect()
    }

    /// Seeded convenience wrapper around [`VaeModel::sample_reconstructions`].
    pub fn sample_reconstructions_seeded(&self, z: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_reconstructions(z, n, &mut rng)
    }

    /// Loss for a single example with an explicit reparameterization draw.
    pub fn loss(&self, z: &[f64], noise: &[f64]) -> Result<VaeLoss> {
        check_dim("vae noise", self.latent_dim, noise.len())?;
        let (mu, logvar) = self.encode(z)?;
        let sigma = checked_sigma(&logvar)?;
        let latent: Vec<f64> = mu.iter().zip(&sigma).zip(noise).map(|((m, s), e)| m + s * e).collect();
        let recon = self.decode(&latent)?;
        let reconstruction = 0.5 * squared_distance(z, &recon);
        let kl = kl_divergence(&mu, &logvar);
        Ok(VaeLoss {
            total: reconstruction + kl,
            reconstruction,
            kl,
        })
    }

    /// Loss for one example; adds its gradients (scaled by `weight`) into the
    /// encoder and decoder buffers.
    pub fn accumulate_gradients(
        &self,
        z: &[f64],
        noise: &[f64],
        weight: f64,
        enc_grads: &mut Gradients,
        dec_grads: &mut Gradients,
        caches: &mut (ForwardCache, ForwardCache),
    ) -> Result<VaeLoss> {
        check_dim("vae noise", self.latent_dim, noise.len())?;
        let d = self.latent_dim;
        let (enc_cache, dec_cache) = caches;
        self.encoder.forward_with(z, enc_cache)?;
        let enc_out = enc_cache.output();
        let (mu, logvar) = enc_out.split_at(d);
        let sigma = checked_sigma(logvar)?;
        let latent: Vec<f64> = mu.iter().zip(&sigma).zip(noise).map(|((m, s), e)| m + s * e).collect();
        self.decoder.forward_with(&latent, dec_cache)?;
        let recon = dec_cache.output();

        let reconstruction = 0.5 * squared_distance(z, recon);
        let kl = kl_divergence(mu, logvar);

        let d_recon: Vec<f64> = recon.iter().zip(z).map(|(r, x)| weight * (r - x)).collect();
        let d_latent = self.decoder.backward_accumulate(dec_cache, &d_recon, dec_grads)?;

        let mut d_enc = vec![0.0; 2 * d];
        for j in 0..d {
            // latent_j = mu_j + exp(logvar_j / 2) noise_j
            d_enc[j] = d_latent[j] + weight * mu[j];
            d_enc[d + j] = d_latent[j] * 0.5 * sigma[j] * noise[j] + weight * 0.5 * (logvar[j].exp() - 1.0);
        }
        self.encoder.backward_accumulate(enc_cache, &d_enc, enc_grads)?;
        Ok(VaeLoss {
            total: reconstruction + kl,
            reconstruction,
            kl,
        })
    }

    pub(crate) fn encoder_mut(&mut self) -> &mut Mlp {
        &mut self.encoder
    }

    pub(crate) fn decoder_mut(&mut self) -> &mut Mlp {
        &mut self.decoder
    }
}

fn checked_sigma(logvar: &[f64]) -> Result<Vec<f64>> {
    logvar
        .iter()
        .enumerate()
        .map(|(j, lv)| {
            let s = (0.5 * lv).exp();
            if lv.is_finite() && s.is_finite() {
                Ok(s)
            } else {
                Err(Error::NonFinite(format!("vae logvar[{j}] = {lv}")))
            }
        })
        .collect()
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeTraining {
    pub model: VaeModel,
    /// Mean per-example loss of each epoch.
    pub loss_curve: Vec<f64>,
}

/// Minibatch training of the negative ELBO with one reparameterized draw per
/// example per epoch.
pub fn train_vae(mut model: VaeModel, data: &[Example], cfg: &TrainConfig) -> Result<VaeTraining> {
    let dim = common_dim(data)?;
    check_dim("training data", model.input_dim(), dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut enc_opt = OptimizerState::new(model.encoder(), cfg.learning_rate, 0.0)?;
    let mut dec_opt = OptimizerState::new(model.decoder(), cfg.learning_rate, 0.0)?;
    let mut enc_grads = Gradients::zeros_like(model.encoder());
    let mut dec_grads = Gradients::zeros_like(model.decoder());
    let mut caches = (ForwardCache::default(), ForwardCache::default());
    let mut noise = vec![0.0; model.latent_dim()];

    let loss_curve = run_epochs(cfg, data.len(), &mut rng, |lr, batch, rng| {
        enc_grads.fill_zero();
        dec_grads.fill_zero();
        let weight = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &i in batch {
            noise.iter_mut().for_each(|e| *e = rng.sample(StandardNormal));
            let l =
                model.accumulate_gradients(&data[i], &noise, weight, &mut enc_grads, &mut dec_grads, &mut caches)?;
            total += l.total;
        }
        if !total.is_finite() {
            return Ok(total);
        }
        enc_opt.learning_rate = lr;
        dec_opt.learning_rate = lr;
        enc_opt.step(model.encoder_mut(), &enc_grads)?;
        dec_opt.step(model.decoder_mut(), &dec_grads)?;
        Ok(total)
    })?;
    Ok(VaeTraining { model, loss_curve })
}
