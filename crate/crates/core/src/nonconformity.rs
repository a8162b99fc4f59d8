//! Nonconformity measures: how strange an example is relative to a proper
//! training set. Larger scores mean stranger inputs; every score is finite and
//! nonnegative for finite input.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::example::{common_dim, squared_distance, Example};
use crate::models::{SvddModel, VaeModel};
use crate::persistence;

/// Default neighbour count for the k-NN measure.
pub const DEFAULT_K: usize = 10;

/// Smallest per-dimension bandwidth produced by [`silverman_bandwidth`].
pub const MIN_BANDWIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScorerKind {
    Knn,
    Kde,
    Vae,
    Svdd,
}

impl ScorerKind {
    pub fn code(self) -> u8 {
        match self {
            ScorerKind::Knn => 1,
            ScorerKind::Kde => 2,
            ScorerKind::Vae => 3,
            ScorerKind::Svdd => 4,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => ScorerKind::Knn,
            2 => ScorerKind::Kde,
            3 => ScorerKind::Vae,
            4 => ScorerKind::Svdd,
            _ => {
                return Err(Error::UnknownCode {
                    what: "scorer kind",
                    code,
                })
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Knn => "knn",
            ScorerKind::Kde => "kde",
            ScorerKind::Vae => "vae",
            ScorerKind::Svdd => "svdd",
        }
    }
}

impl std::str::FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ScorerKind::Knn),
            "kde" => Ok(ScorerKind::Kde),
            "vae" => Ok(ScorerKind::Vae),
            "svdd" => Ok(ScorerKind::Svdd),
            other => Err(Error::InvalidArgument(format!("unknown scorer {other:?}"))),
        }
    }
}

/// Mean Euclidean distance from `z` to its `k` nearest neighbours in `train`.
pub fn knn_score(train: &[Example], z: &[f64], k: usize) -> Result<f64> {
    let dim = common_dim(train)?;
    check_dim("knn query", dim, z.len())?;
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            train.len()
        )));
    }
    let mut d: Vec<f64> = train.iter().map(|t| squared_distance(t, z).sqrt()).collect();
    d.select_nth_unstable_by(k - 1, f64::total_cmp);
    let nearest = &mut d[..k];
    nearest.sort_unstable_by(f64::total_cmp);
    Ok(nearest.iter().sum::<f64>() / k as f64)
}

/// Per-dimension Gaussian bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth(Vec<f64>);

impl Bandwidth {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("bandwidth has no dimensions".into()));
        }
        if let Some(h) = values.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self(values))
    }

    pub fn uniform(h: f64, dim: usize) -> Result<Self> {
        Self::new(vec![h; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Silverman's rule of thumb applied independently to every dimension:
/// `h_j = 1.06 sigma_j n^(-1/5)`, floored at [`MIN_BANDWIDTH`].
pub fn silverman_bandwidth(train: &[Example]) -> Result<Bandwidth> {
    let dim = common_dim(train)?;
    let n = train.len() as f64;
    let factor = 1.06 * n.powf(-0.2);
    let values = (0..dim)
        .map(|j| {
            let mean = train.iter().map(|e| e[j]).sum::<f64>() / n;
            let var = if train.len() > 1 {
                train.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (factor * var.sqrt()).max(MIN_BANDWIDTH)
        })
        .collect();
    Bandwidth::new(values)
}

/// Negative log of the Gaussian-kernel density estimate at `z`, offset so that
/// the score is 0 when `z` coincides with every training point.
///
/// Equals `ln n - logsumexp_i(-q_i / 2)` with `q_i` the bandwidth-scaled
/// squared distance to `train[i]`.
pub fn kde_score(train: &[Example], z: &[f64], h: &Bandwidth) -> Result<f64> {
    let dim = common_dim(train)?;
    check_dim("kde query", dim, z.len())?;
    check_dim("kde bandwidth", dim, h.values().len())?;
    let logs: Vec<f64> = train
        .iter()
        .map(|t| {
            -0.5 * t
                .iter()
                .zip(z)
                .zip(h.values())
                .map(|((a, b), h)| ((a - b) / h).powi(2))
                .sum::<f64>()
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    // clamp the rounding error that can push a coincident query below zero
    Ok(((train.len() as f64).ln() - lse).max(0.0))
}

/// Squared reconstruction error `|z - z'|^2`.
pub fn vae_score(z: &[f64], reconstruction: &[f64]) -> Result<f64> {
    check_dim("vae score", z.len(), reconstruction.len())?;
    Ok(squared_distance(z, reconstruction))
}

/// Squared distance of the SVDD representation of `z` to the center.
pub fn svdd_score(model: &SvddModel, z: &[f64]) -> Result<f64> {
    model.distance_sq(z)
}

/// A nonconformity measure bound to its proper training set or model.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Knn { train: Vec<Example>, k: usize },
    Kde { train: Vec<Example>, bandwidth: Bandwidth },
    Vae(VaeModel),
    Svdd(SvddModel),
}

impl Scorer {
    pub fn knn(train: Vec<Example>, k: usize) -> Result<Self> {
        common_dim(&train)?;
        if k == 0 || k > train.len() {
            return Err(Error::InvalidArgument(format!(
                "k must be in 1..={}, got {k}",
                train.len()
            )));
        }
        Ok(Scorer::Knn { train, k })
    }

    /// KDE scorer; `bandwidth` defaults to [`silverman_bandwidth`].
    pub fn kde(train: Vec<Example>, bandwidth: Option<Bandwidth>) -> Result<Self> {
        let dim = common_dim(&train)?;
        let bandwidth = match bandwidth {
            Some(b) => b,
            None => silverman_bandwidth(&train)?,
        };
        check_dim("kde bandwidth", dim, bandwidth.values().len())?;
        Ok(Scorer::Kde { train, bandwidth })
    }

    pub fn svdd(model: SvddModel) -> Result<Self> {
        model.center()?;
        Ok(Scorer::Svdd(model))
    }

    pub fn kind(&self) -> ScorerKind {
        match self {
            Scorer::Knn { .. } => ScorerKind::Knn,
            Scorer::Kde { .. } => ScorerKind::Kde,
            Scorer::Vae(_) => ScorerKind::Vae,
            Scorer::Svdd(_) => ScorerKind::Svdd,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Scorer::Knn { train, .. } | Scorer::Kde { train, .. } => train[0].dim(),
            Scorer::Vae(m) => m.input_dim(),
            Scorer::Svdd(m) => m.input_dim(),
        }
    }

    /// A single score. The VAE scores its noise-free mean reconstruction.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        match self {
            Scorer::Knn { train, k } => knn_score(train, z, *k),
            Scorer::Kde { train, bandwidth } => kde_score(train, z, bandwidth),
            Scorer::Vae(m) => vae_score(z, &m.reconstruct_mean(z)?),
            Scorer::Svdd(m) => svdd_score(m, z),
        }
    }

    /// `n` scores of `z`. Only the VAE is stochastic (one score per sampled
    /// reconstruction); deterministic scorers repeat their single score.
    pub fn score_many<R: Rng + ?Sized>(&self, z: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Scorer::Vae(m) => m
                .sample_reconstructions(z, n, rng)?
                .iter()
                .map(|r| vae_score(z, r))
                .collect(),
            _ => {
                if n == 0 {
                    return Err(Error::InvalidArgument("sample count must be at least 1".into()));
                }
                Ok(vec![self.score(z)?; n])
            }
        }
    }

    /// Eight-byte digest binding calibration scores to this scorer.
    pub fn fingerprint(&self) -> [u8; 8] {
        persistence::scorer_fingerprint(self)
    }
}
