//! Inductive conformal anomaly detection.
//!
//! Offline, [`calibrate`] splits the training data into a proper training set
//! and a calibration set and records the sorted calibration scores. Online,
//! every test score becomes a p-value ([`p_value`]); batches or sliding
//! windows of p-values are combined into the simple mixture martingale
//! ([`mixture_martingale_log`]), which is fed either to a CUSUM (VAE pipeline)
//! or compared against a fixed threshold (SVDD pipeline). Martingale values
//! and detector thresholds are handled in the log domain throughout.

mod calibration;
mod detector;
mod martingale;
mod pipeline;

pub use calibration::{calibrate, calibrate_with, p_value, CalibrationSet, VaeCalibration};
pub use detector::{DetectorMode, DetectorState};
pub use martingale::{
    mixture_martingale_log, mixture_martingale_log_from_sum, power_martingale_log, MartingaleState, SIMPSON_POINTS,
};
pub use pipeline::{
    svdd_detect_step, vae_detect_step, Backbone, DetectorConfig, Method, Monitor, Pipeline, StepRecord,
    SvddDiagnostics, VaeDiagnostics,
};
