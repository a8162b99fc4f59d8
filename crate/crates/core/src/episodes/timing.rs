use std::time::Instant;

use super::scene::SceneGenerator;
use crate::conformal::{DetectorConfig, Method, Pipeline};
use crate::error::{Error, Result};
use crate::stats::five_number_summary;

/// Per-step wall-clock summary for one `(method, N)` configuration, in
/// milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: Method,
    pub n: usize,
    /// `[min, Q1, Q2, Q3, max]`.
    pub millis: [f64; 5],
}

impl TimingRow {
    pub fn median(&self) -> f64 {
        self.millis[2]
    }
}

const WARMUP_STEPS: usize = 20;

/// Times `steps` detector steps on in-distribution frames for each `N`.
/// Frame generation happens up front and is not timed. Thresholds are
/// infinite so no alarm interrupts the stream. Monitors for all `N` are
/// stepped round-robin on each frame so slow drift in machine speed affects
/// every configuration alike.
pub fn benchmark_timing(
    gen: &SceneGenerator,
    pipeline: &Pipeline,
    steps: usize,
    n_values: &[usize],
    seed: u64,
) -> Result<Vec<TimingRow>> {
    if steps == 0 || n_values.is_empty() {
        return Err(Error::InvalidArgument("timing needs steps and at least one N".into()));
    }
    let frames_gen = SceneGenerator { seed, ..gen.clone() };
    let (frames, _) = frames_gen.generate_dataset(steps + WARMUP_STEPS, (0.0, 20.0))?;
    let mut monitors = n_values
        .iter()
        .map(|&n| {
            pipeline.monitor(&DetectorConfig {
                n,
                delta: 0.0,
                tau: f64::INFINITY,
                seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for z in &frames[..WARMUP_STEPS] {
        for monitor in &mut monitors {
            monitor.step(z)?;
        }
    }
    let mut samples = vec![Vec::with_capacity(steps); n_values.len()];
    for z in &frames[WARMUP_STEPS..] {
        for (monitor, times) in monitors.iter_mut().zip(&mut samples) {
            let start = Instant::now();
            let rec = monitor.step(z)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(rec);
        }
    }
    Ok(n_values
        .iter()
        .zip(&samples)
        .map(|(&n, times)| TimingRow {
            method: pipeline.method(),
            n,
            millis: five_number_summary(times),
        })
        .collect())
}
