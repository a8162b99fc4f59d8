use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mixture_martingale_log, p_value, CalibrationSet, DetectorState, MartingaleState};
use crate::error::{Error, Result};
use crate::models::{SvddModel, VaeModel};
use crate::nonconformity::{svdd_score, vae_score, Scorer, ScorerKind};

/// Per-step output of the VAE pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeDiagnostics {
    pub scores: Vec<f64>,
    pub p_values: Vec<f64>,
    pub m_log: f64,
    pub s: f64,
    pub alarm: bool,
}

/// Per-step output of the SVDD pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SvddDiagnostics {
    pub score: f64,
    pub p_value: f64,
    pub m_log: f64,
    pub window_sum: f64,
    pub alarm: bool,
}

fn require_kind(cal: &CalibrationSet, kind: ScorerKind) -> Result<()> {
    if cal.kind() != kind {
        return Err(Error::InvalidArgument(format!(
            "calibration was built with the {} scorer, pipeline needs {}",
            cal.kind().name(),
            kind.name()
        )));
    }
    Ok(())
}

/// One step of VAE-based detection: `n` sampled reconstructions give `n`
/// scores and `n` p-values, whose mixture martingale feeds one CUSUM step.
pub fn vae_detect_step<R: Rng + ?Sized>(
    z: &[f64],
    vae: &VaeModel,
    cal: &CalibrationSet,
    n: usize,
    detector: &mut DetectorState,
    rng: &mut R,
) -> Result<VaeDiagnostics> {
    require_kind(cal, ScorerKind::Vae)?;
    let recons = vae.sample_reconstructions(z, n, rng)?;
    let scores = recons.iter().map(|r| vae_score(z, r)).collect::<Result<Vec<_>>>()?;
    let p_values = scores.iter().map(|&a| p_value(a, cal)).collect::<Result<Vec<_>>>()?;
    let m_log = mixture_martingale_log(&p_values)?;
    let alarm = detector.observe(m_log)?;
    Ok(VaeDiagnostics {
        scores,
        p_values,
        m_log,
        s: detector.s(),
        alarm,
    })
}

/// One step of SVDD-based detection: one score, one p-value pushed into the
/// sliding window, mixture martingale of the window, stateless threshold.
pub fn svdd_detect_step(
    z: &[f64],
    svdd: &SvddModel,
    cal: &CalibrationSet,
    mart: &mut MartingaleState,
    detector: &mut DetectorState,
) -> Result<SvddDiagnostics> {
    require_kind(cal, ScorerKind::Svdd)?;
    let score = svdd_score(svdd, z)?;
    let p = p_value(score, cal)?;
    mart.push(p)?;
    let m_log = mart.mixture_log()?;
    let alarm = detector.observe(m_log)?;
    Ok(SvddDiagnostics {
        score,
        p_value: p,
        m_log,
        window_sum: mart.log_sum(),
        alarm,
    })
}

/// Which learned measure drives detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Vae,
    Svdd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Vae => "vae",
            Method::Svdd => "svdd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vae" => Ok(Method::Vae),
            "svdd" => Ok(Method::Svdd),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Runtime parameters of a detector. `delta` is ignored by the SVDD pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Samples per input (VAE) or sliding-window length (SVDD).
    pub n: usize,
    pub delta: f64,
    pub tau: f64,
    pub seed: u64,
}

/// A trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Backbone {
    Vae(VaeModel),
    Svdd(SvddModel),
}

impl Backbone {
    pub fn method(&self) -> Method {
        match self {
            Backbone::Vae(_) => Method::Vae,
            Backbone::Svdd(_) => Method::Svdd,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Backbone::Vae(m) => m.input_dim(),
            Backbone::Svdd(m) => m.input_dim(),
        }
    }

    pub fn into_scorer(self) -> Result<Scorer> {
        match self {
            Backbone::Vae(m) => Ok(Scorer::Vae(m)),
            Backbone::Svdd(m) => Scorer::svdd(m),
        }
    }
}

/// A model together with the calibration set it produced. Immutable and
/// shareable between concurrent monitors.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    scorer: Scorer,
    cal: CalibrationSet,
}

impl Pipeline {
    /// Binds `cal` to `backbone`, checking the scorer fingerprint.
    pub fn new(backbone: Backbone, cal: CalibrationSet) -> Result<Self> {
        let scorer = backbone.into_scorer()?;
        cal.check_scorer(&scorer)?;
        Ok(Self { scorer, cal })
    }

    pub fn method(&self) -> Method {
        match self.scorer {
            Scorer::Vae(_) => Method::Vae,
            _ => Method::Svdd,
        }
    }

    pub fn scorer(&self) -> &Scorer {
        &self.scorer
    }

    pub fn calibration(&self) -> &CalibrationSet {
        &self.cal
    }

    pub fn input_dim(&self) -> usize {
        self.scorer.input_dim()
    }

    /// Fresh per-stream detector state.
    pub fn monitor(&self, cfg: &DetectorConfig) -> Result<Monitor<'_>> {
        if cfg.n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let inner = match &self.scorer {
            Scorer::Vae(vae) => MonitorKind::Vae {
                vae,
                n: cfg.n,
                detector: DetectorState::cusum(cfg.delta, cfg.tau)?,
                rng,
            },
            Scorer::Svdd(svdd) => MonitorKind::Svdd {
                svdd,
                mart: MartingaleState::warmed_up(cfg.n, &mut rng)?,
                detector: DetectorState::stateless(cfg.tau)?,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "no detection pipeline for the {} scorer",
                    other.kind().name()
                )))
            }
        };
        Ok(Monitor {
            cal: &self.cal,
            inner,
            step: 0,
        })
    }
}

/// One row of per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// One-based step index.
    pub step: u64,
    /// The score (SVDD) or mean of the sampled scores (VAE).
    pub score: f64,
    pub p_values: Vec<f64>,
    pub m_log: f64,
    /// CUSUM statistic; `None` for the stateless detector.
    pub s: Option<f64>,
    pub alarm: bool,
}

#[allow(clippy::large_enum_variant)]
enum MonitorKind<'a> {
    Vae {
        vae: &'a VaeModel,
        n: usize,
        detector: DetectorState,
        rng: ChaCha8Rng,
    },
    Svdd {
        svdd: &'a SvddModel,
        mart: MartingaleState,
        detector: DetectorState,
    },
}

/// Stateful detection over one input stream.
pub struct Monitor<'a> {
    cal: &'a CalibrationSet,
    inner: MonitorKind<'a>,
    step: u64,
}

impl Monitor<'_> {
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, z: &[f64]) -> Result<StepRecord> {
        self.step += 1;
        let step = self.step;
        match &mut self.inner {
            MonitorKind::Vae { vae, n, detector, rng } => {
                let d = vae_detect_step(z, vae, self.cal, *n, detector, rng)?;
                Ok(StepRecord {
                    step,
                    score: d.scores.iter().sum::<f64>() / d.scores.len() as f64,
                    p_values: d.p_values,
                    m_log: d.m_log,
                    s: Some(d.s),
                    alarm: d.alarm,
                })
            }
            MonitorKind::Svdd { svdd, mart, detector } => {
                let d = svdd_detect_step(z, svdd, self.cal, mart, detector)?;
                Ok(StepRecord {
                    step,
                    score: d.score,
                    p_values: vec![d.p_value],
                    m_log: d.m_log,
                    s: None,
                    alarm: d.alarm,
                })
            }
        }
    }
}
