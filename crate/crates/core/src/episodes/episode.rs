use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::scene::SceneGenerator;
use super::schedule::DriftSchedule;
use crate::conformal::{DetectorConfig, Method, Pipeline, StepRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    InDist,
    Ood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::TruePositive => "true_positive",
            Verdict::FalsePositive => "false_positive",
            Verdict::TrueNegative => "true_negative",
            Verdict::FalseNegative => "false_negative",
        }
    }
}

/// Outcome of one episode. Steps are zero-based episode time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub label: Label,
    pub alarm_step: Option<u64>,
    pub onset_step: Option<u64>,
    pub verdict: Verdict,
    /// Frames from onset to alarm; only for true positives.
    pub delay_frames: Option<u64>,
}

impl EpisodeResult {
    /// Classifies an alarm against the schedule's ground truth. An alarm
    /// before the onset of an out-of-distribution episode is a false positive.
    pub fn classify(onset_step: Option<u64>, alarm_step: Option<u64>) -> Self {
        let label = if onset_step.is_some() {
            Label::Ood
        } else {
            Label::InDist
        };
        let (verdict, delay_frames) = match (onset_step, alarm_step) {
            (None, None) => (Verdict::TrueNegative, None),
            (None, Some(_)) => (Verdict::FalsePositive, None),
            (Some(_), None) => (Verdict::FalseNegative, None),
            (Some(on), Some(a)) if a < on => (Verdict::FalsePositive, None),
            (Some(on), Some(a)) => (Verdict::TruePositive, Some(a - on)),
        };
        Self {
            label,
            alarm_step,
            onset_step,
            verdict,
            delay_frames,
        }
    }
}

/// One diagnostics row of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub t: u64,
    pub r: f64,
    pub record: StepRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub result: EpisodeResult,
    pub rows: Vec<EpisodeRow>,
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Runs the stream `r(t)` for `t = 0, 1, ...` through a fresh monitor until
/// the first alarm (inclusive) or `max_steps`. When `stop_at_alarm` is false
/// the full horizon is recorded and the result reflects the first alarm.
fn simulate(
    gen: &SceneGenerator,
    schedule: &DriftSchedule,
    pipeline: &Pipeline,
    cfg: &DetectorConfig,
    max_steps: u64,
    seed: u64,
    stop_at_alarm: bool,
) -> Result<EpisodeOutcome> {
    gen.validate()?;
    if pipeline.input_dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            context: "scene vs pipeline",
            expected: pipeline.input_dim(),
            actual: gen.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = gen.sample_scene(&mut rng);
    let mut monitor = pipeline.monitor(&DetectorConfig {
        seed: splitmix(seed ^ 0x6d6f_6e69),
        ..*cfg
    })?;
    let mut rows = Vec::new();
    let mut alarm_step = None;
    for t in 0..max_steps {
        let r = schedule.value(t);
        let z = gen.frame(&scene, t as f64, r, &mut rng);
        let record = monitor.step(&z)?;
        let alarm = record.alarm;
        rows.push(EpisodeRow { t, r, record });
        if alarm && alarm_step.is_none() {
            alarm_step = Some(t);
            if stop_at_alarm {
                break;
            }
        }
    }
    Ok(EpisodeOutcome {
        result: EpisodeResult::classify(schedule.onset(max_steps), alarm_step),
        rows,
    })
}

/// Runs one episode, stopping at the first alarm.
pub fn run_episode(
    gen: &SceneGenerator,
    schedule: &DriftSchedule,
    pipeline: &Pipeline,
    cfg: &DetectorConfig,
    max_steps: u64,
    seed: u64,
) -> Result<EpisodeOutcome> {
    simulate(gen, schedule, pipeline, cfg, max_steps, seed, true)
}

/// Per-step `log M` over the full horizon with alarms disabled. The martingale
/// sequence does not depend on the thresholds, so any `(delta, tau)` can be
/// replayed on it with [`first_alarm`].
pub fn episode_trace(
    gen: &SceneGenerator,
    schedule: &DriftSchedule,
    pipeline: &Pipeline,
    n: usize,
    max_steps: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let cfg = DetectorConfig {
        n,
        delta: 0.0,
        tau: f64::INFINITY,
        seed: 0,
    };
    let out = simulate(gen, schedule, pipeline, &cfg, max_steps, seed, false)?;
    Ok(out.rows.iter().map(|r| r.record.m_log).collect())
}

/// First step at which the detector of `method` alarms on a `log M` trace.
pub fn first_alarm(method: Method, m_logs: &[f64], delta: f64, tau: f64) -> Option<u64> {
    match method {
        Method::Svdd => m_logs.iter().position(|&m| m > tau).map(|t| t as u64),
        Method::Vae => {
            let mut s = 0.0f64;
            for t in 1..m_logs.len() {
                s = (s + m_logs[t - 1] - delta).max(0.0);
                if s > tau {
                    return Some(t as u64);
                }
            }
            None
        }
    }
}

/// Episode plan for a suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub index: usize,
    pub schedule: DriftSchedule,
    pub seed: u64,
}

/// Shape of an evaluation suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub in_dist: usize,
    pub ood: usize,
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            in_dist: 25,
            ood: 25,
            max_steps: 160,
            seed: 0,
        }
    }
}

/// Draws schedules until the requested numbers of in-distribution and
/// out-of-distribution episodes are reached, keeping draw order.
pub fn plan_suite(cfg: &SuiteConfig) -> Result<Vec<EpisodeSpec>> {
    if cfg.in_dist + cfg.ood == 0 {
        return Err(Error::InvalidArgument("suite needs at least one episode".into()));
    }
    // the ramp ends by t = 110, so shorter horizons may never see a crossing
    if cfg.ood > 0 && cfg.max_steps <= 110 {
        return Err(Error::InvalidArgument(
            "max_steps must exceed 110 for ood episodes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut n_in, mut n_ood) = (0, 0);
    let mut specs = Vec::with_capacity(cfg.in_dist + cfg.ood);
    while n_in < cfg.in_dist || n_ood < cfg.ood {
        let schedule = DriftSchedule::sample(&mut rng);
        let ood = schedule.onset(cfg.max_steps).is_some();
        let keep = if ood { n_ood < cfg.ood } else { n_in < cfg.in_dist };
        if !keep {
            continue;
        }
        if ood {
            n_ood += 1;
        } else {
            n_in += 1;
        }
        let index = specs.len();
        specs.push(EpisodeSpec {
            index,
            schedule,
            seed: splitmix(cfg.seed.wrapping_mul(0x1000_0000_01b3) ^ index as u64),
        });
    }
    Ok(specs)
}

/// Aggregate counts in the layout of a detection table.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteMetrics {
    pub parameters: String,
    pub in_dist: usize,
    pub ood: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub mean_delay: Option<f64>,
}

impl SuiteMetrics {
    pub fn from_results(parameters: String, results: &[EpisodeResult]) -> Self {
        let in_dist = results.iter().filter(|r| r.label == Label::InDist).count();
        let ood = results.len() - in_dist;
        let count = |v: Verdict| results.iter().filter(|r| r.verdict == v).count();
        let delays: Vec<f64> = results
            .iter()
            .filter_map(|r| r.delay_frames.map(|d| d as f64))
            .collect();
        Self {
            parameters,
            in_dist,
            ood,
            false_positives: count(Verdict::FalsePositive),
            false_negatives: count(Verdict::FalseNegative),
            mean_delay: (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64),
        }
    }

    /// `k/n`, or `n/a` when the denominator is zero.
    pub fn false_positive_cell(&self) -> String {
        ratio(self.false_positives, self.in_dist)
    }

    pub fn false_negative_cell(&self) -> String {
        ratio(self.false_negatives, self.ood)
    }

    pub fn delay_cell(&self) -> String {
        self.mean_delay.map_or_else(|| "n/a".to_string(), |d| format!("{d:.2}"))
    }
}

fn ratio(k: usize, n: usize) -> String {
    if n == 0 {
        "n/a".to_string()
    } else {
        format!("{k}/{n}")
    }
}

pub fn parameter_label(method: Method, cfg: &DetectorConfig) -> String {
    match method {
        Method::Vae => format!("N={} delta={} tau={}", cfg.n, cfg.delta, cfg.tau),
        Method::Svdd => format!("N={} tau={}", cfg.n, cfg.tau),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub specs: Vec<EpisodeSpec>,
    pub outcomes: Vec<EpisodeOutcome>,
    pub metrics: SuiteMetrics,
}

/// Runs every planned episode (in parallel) and aggregates the verdicts.
/// Results are ordered by episode index.
pub fn run_suite(
    gen: &SceneGenerator,
    pipeline: &Pipeline,
    cfg: &DetectorConfig,
    suite: &SuiteConfig,
) -> Result<SuiteReport> {
    let specs = plan_suite(suite)?;
    let outcomes = specs
        .par_iter()
        .map(|s| run_episode(gen, &s.schedule, pipeline, cfg, suite.max_steps, s.seed))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<EpisodeResult> = outcomes.iter().map(|o| o.result).collect();
    let metrics = SuiteMetrics::from_results(parameter_label(pipeline.method(), cfg), &results);
    Ok(SuiteReport {
        specs,
        outcomes,
        metrics,
    })
}
