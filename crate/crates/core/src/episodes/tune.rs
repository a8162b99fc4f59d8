use rayon::prelude::*;

use super::episode::{episode_trace, first_alarm, plan_suite, EpisodeResult, SuiteConfig, SuiteMetrics};
use super::scene::SceneGenerator;
use crate::conformal::{DetectorConfig, Method, Pipeline};
use crate::error::{Error, Result};

/// Candidate thresholds. `deltas` is ignored for the SVDD pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneGrid {
    pub deltas: Vec<f64>,
    pub taus: Vec<f64>,
}

impl TuneGrid {
    /// `count` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }

    fn points(&self, method: Method) -> Vec<(f64, f64)> {
        let deltas = match method {
            Method::Vae => self.deltas.clone(),
            Method::Svdd => vec![0.0],
        };
        deltas
            .iter()
            .flat_map(|&d| self.taus.iter().map(move |&t| (d, t)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunePoint {
    pub delta: f64,
    pub tau: f64,
    pub metrics: SuiteMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub points: Vec<TunePoint>,
    /// Index into `points` of the selected operating point.
    pub best: usize,
}

impl TuneReport {
    pub fn best(&self) -> &TunePoint {
        &self.points[self.best]
    }

    pub fn best_config(&self, n: usize, seed: u64) -> DetectorConfig {
        let b = self.best();
        DetectorConfig {
            n,
            delta: b.delta,
            tau: b.tau,
            seed,
        }
    }
}

fn rank(m: &SuiteMetrics) -> (usize, usize, f64) {
    (
        m.false_positives,
        m.false_negatives,
        m.mean_delay.unwrap_or(f64::INFINITY),
    )
}

/// Grid search over `(delta, tau)` on a tuning suite. The selected point has
/// the fewest false positives, then the fewest false negatives, then the
/// smallest mean delay; exact ties keep the earliest grid point.
///
/// The martingale traces are computed once per episode and the detectors are
/// replayed on them, so the cost is dominated by the forward passes.
pub fn tune(
    gen: &SceneGenerator,
    pipeline: &Pipeline,
    n: usize,
    suite: &SuiteConfig,
    grid: &TuneGrid,
) -> Result<TuneReport> {
    let method = pipeline.method();
    let points = grid.points(method);
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty tuning grid".into()));
    }
    if points.iter().any(|(d, t)| d.is_nan() || t.is_nan()) {
        return Err(Error::InvalidArgument("grid values must not be NaN".into()));
    }
    let specs = plan_suite(suite)?;
    let traces = specs
        .par_iter()
        .map(|s| {
            let trace = episode_trace(gen, &s.schedule, pipeline, n, suite.max_steps, s.seed)?;
            Ok((s.schedule.onset(suite.max_steps), trace))
        })
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<TunePoint> = points
        .into_iter()
        .map(|(delta, tau)| {
            let results: Vec<EpisodeResult> = traces
                .iter()
                .map(|(onset, trace)| EpisodeResult::classify(*onset, first_alarm(method, trace, delta, tau)))
                .collect();
            let cfg = DetectorConfig { n, delta, tau, seed: 0 };
            TunePoint {
                delta,
                tau,
                metrics: SuiteMetrics::from_results(super::episode::parameter_label(method, &cfg), &results),
            }
        })
        .collect();
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if rank(&p.metrics).partial_cmp(&rank(&points[best].metrics)) == Some(std::cmp::Ordering::Less) {
            best = i;
        }
    }
    Ok(TuneReport { points, best })
}
