use crate::error::{Error, Result};

/// Alarm rule applied to the log-martingale sequence. Thresholds live in the
/// log domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorMode {
    /// `S_t = max(0, S_{t-1} + log M_{t-1} - delta)`, alarm when `S_t > tau`.
    StatefulCusum { delta: f64 },
    /// Alarm when `log M_t > tau`.
    StatelessThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    mode: DetectorMode,
    tau: f64,
    s: f64,
    last_m_log: Option<f64>,
    steps: u64,
}

impl DetectorState {
    pub fn cusum(delta: f64, tau: f64) -> Result<Self> {
        if delta.is_nan() || tau.is_nan() {
            return Err(Error::InvalidArgument("detector parameters must not be NaN".into()));
        }
        Ok(Self::with_mode(DetectorMode::StatefulCusum { delta }, tau))
    }

    pub fn stateless(tau: f64) -> Result<Self> {
        if tau.is_nan() {
            return Err(Error::InvalidArgument("detector threshold must not be NaN".into()));
        }
        Ok(Self::with_mode(DetectorMode::StatelessThreshold, tau))
    }

    fn with_mode(mode: DetectorMode, tau: f64) -> Self {
        Self {
            mode,
            tau,
            s: 0.0,
            last_m_log: None,
            steps: 0,
        }
    }

    pub fn mode(&self) -> DetectorMode {
        self.mode
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Current CUSUM statistic (always 0 for the stateless detector).
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Most recent `log M` seen by [`Self::observe`].
    pub fn last_m_log(&self) -> Option<f64> {
        self.last_m_log
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One CUSUM recurrence step fed with the previous step's `log M`.
    /// `S` resets to 0 after an alarm.
    pub fn cusum_step(&mut self, m_log_prev: f64) -> Result<bool> {
        let DetectorMode::StatefulCusum { delta } = self.mode else {
            return Err(Error::InvalidArgument("cusum_step on a stateless detector".into()));
        };
        self.s = (self.s + m_log_prev - delta).max(0.0);
        let alarm = self.s > self.tau;
        if alarm {
            self.s = 0.0;
        }
        Ok(alarm)
    }

    /// Stateless rule: alarm iff `log M > tau`.
    pub fn stateless_step(&mut self, m_log: f64) -> Result<bool> {
        if self.mode != DetectorMode::StatelessThreshold {
            return Err(Error::InvalidArgument("stateless_step on a cusum detector".into()));
        }
        Ok(m_log > self.tau)
    }

    /// Feeds the martingale value of the current step.
    ///
    /// The CUSUM consumes `log M_{t-1}` at step `t` (with `S_1 = 0`), so the
    /// value passed here first influences the statistic on the next call.
    pub fn observe(&mut self, m_log: f64) -> Result<bool> {
        self.steps += 1;
        let alarm = match self.mode {
            DetectorMode::StatefulCusum { .. } => match self.last_m_log {
                None => {
                    self.s = 0.0;
                    false
                }
                Some(prev) => self.cusum_step(prev)?,
            },
            DetectorMode::StatelessThreshold => self.stateless_step(m_log)?,
        };
        self.last_m_log = Some(m_log);
        Ok(alarm)
    }
}
