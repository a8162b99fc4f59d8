use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Two-phase training schedule: a searching phase followed by a fine-tuning
/// phase at a lower learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub fine_tune_epochs: usize,
    pub fine_tune_learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 1e-3,
            fine_tune_epochs: 100,
            fine_tune_learning_rate: 1e-4,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs + self.fine_tune_epochs == 0 {
            return Err(Error::InvalidArgument("at least one epoch is required".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        for lr in [self.learning_rate, self.fine_tune_learning_rate] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "learning rate must be positive, got {lr}"
                )));
            }
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs + self.fine_tune_epochs
    }

    /// Learning rate in effect at a zero-based epoch index.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if epoch < self.epochs {
            self.learning_rate
        } else {
            self.fine_tune_learning_rate
        }
    }
}

/// Runs the schedule, handing each shuffled minibatch to `step` together with
/// the learning rate. `step` returns the summed per-example loss of the batch.
/// Returns the mean per-example loss of every epoch.
pub(crate) fn run_epochs<R, F>(cfg: &TrainConfig, n: usize, rng: &mut R, mut step: F) -> Result<Vec<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(f64, &[usize], &mut R) -> Result<f64>,
{
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(cfg.total_epochs());
    for epoch in 0..cfg.total_epochs() {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            total += step(lr, batch, rng)?;
        }
        let mean = total / n as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                loss: mean,
            });
        }
        curve.push(mean);
    }
    Ok(curve)
}
