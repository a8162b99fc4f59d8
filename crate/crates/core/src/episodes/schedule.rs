use rand::Rng;

use super::scene::IN_DISTRIBUTION_MAX_R;
use crate::error::{Error, Result};

/// Piecewise-linear corruption ramp: `r0` before `t0`, slope `beta` on
/// `[t0, t1]`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSchedule {
    pub r0: f64,
    pub t0: u64,
    pub t1: u64,
    pub beta: f64,
}

impl DriftSchedule {
    pub fn new(r0: f64, t0: u64, t1: u64, beta: f64) -> Result<Self> {
        if t0 >= t1 {
            return Err(Error::InvalidArgument(format!("ramp start {t0} must precede end {t1}")));
        }
        if !(r0.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidArgument("schedule values must be finite".into()));
        }
        Ok(Self { r0, t0, t1, beta })
    }

    /// `r0 ~ U[0,10]`, `t0 ~ U{10..30}`, `t1 ~ U{90..110}`, `beta ~ U[0.1,0.5]`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            r0: rng.random_range(0.0..=10.0),
            t0: rng.random_range(10..=30),
            t1: rng.random_range(90..=110),
            beta: rng.random_range(0.1..=0.5),
        }
    }

    pub fn value(&self, t: u64) -> f64 {
        if t < self.t0 {
            self.r0
        } else if t <= self.t1 {
            self.r0 + self.beta * (t - self.t0) as f64
        } else {
            self.r0 + self.beta * (self.t1 - self.t0) as f64
        }
    }

    /// Level reached after the ramp.
    pub fn plateau(&self) -> f64 {
        self.value(self.t1)
    }

    /// First step in `0..max_steps` with `r > 20`.
    pub fn onset(&self, max_steps: u64) -> Option<u64> {
        (0..max_steps).find(|&t| self.value(t) > IN_DISTRIBUTION_MAX_R)
    }
}
