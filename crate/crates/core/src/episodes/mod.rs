//! Synthetic drift episodes, detection metrics and timing.

mod episode;
mod report;
mod scene;
mod schedule;
mod timing;
mod tune;

pub use episode::{
    episode_trace, first_alarm, parameter_label, plan_suite, run_episode, run_suite, EpisodeOutcome, EpisodeResult,
    EpisodeRow, EpisodeSpec, Label, SuiteConfig, SuiteMetrics, SuiteReport, Verdict,
};
pub use report::{diagnostics_csv, episode_csv, metrics_csv, timing_csv, tune_csv};
pub use scene::{SceneGenerator, SceneParams, IN_DISTRIBUTION_MAX_R};
pub use schedule::DriftSchedule;
pub use timing::{benchmark_timing, TimingRow};
pub use tune::{tune, TuneGrid, TunePoint, TuneReport};
