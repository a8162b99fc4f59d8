use std::collections::VecDeque;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};

/// Number of nodes of the composite Simpson rule over `epsilon in [0, 1]`.
pub const SIMPSON_POINTS: usize = 1001;

/// Pushes between exact recomputations of the window's log-sum.
const RESUM_PERIOD: u64 = 256;

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p-value {p} outside (0, 1]")))
    }
}

/// `log M^eps = sum_i (log eps + (eps - 1) log p_i)` of the power martingale.
pub fn power_martingale_log(p_values: &[f64], eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside (0, 1]")));
    }
    let mut acc = 0.0;
    for &p in p_values {
        check_p(p)?;
        acc += eps.ln() + (eps - 1.0) * p.ln();
    }
    Ok(acc)
}

/// `(ln eps_i, ln w_i)` for the interior and right end of the Simpson grid.
/// The node `eps = 0` is omitted: its integrand is exactly 0 for `n >= 1`.
fn simpson_grid() -> &'static [(f64, f64)] {
    static GRID: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    GRID.get_or_init(|| {
        let intervals = SIMPSON_POINTS - 1;
        let h = 1.0 / intervals as f64;
        (1..=intervals)
            .map(|i| {
                let eps = i as f64 * h;
                let w = if i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                (eps.ln(), (w * h / 3.0).ln())
            })
            .collect()
    })
}

/// `log int_0^1 exp(n ln eps + (eps - 1) s) d eps` for `s = sum log p_i` over
/// `n` p-values. The mixture martingale depends on the p-values only through
/// `(n, s)`.
pub fn mixture_martingale_log_from_sum(n: usize, sum_log_p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "mixture martingale needs at least one p-value".into(),
        ));
    }
    if !(sum_log_p <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sum of log p-values {sum_log_p} must be <= 0"
        )));
    }
    let n = n as f64;
    let grid = simpson_grid();
    let term = |&(ln_eps, ln_w): &(f64, f64)| ln_w + n * ln_eps + (ln_eps.exp() - 1.0) * sum_log_p;
    let max = grid.iter().map(term).fold(f64::NEG_INFINITY, f64::max);
    let acc: f64 = grid.iter().map(|g| (term(g) - max).exp()).sum();
    Ok(max + acc.ln())
}

/// Mixture martingale of a batch of p-values, computed from scratch.
pub fn mixture_martingale_log(p_values: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &p in p_values {
        check_p(p)?;
        s += p.ln();
    }
    mixture_martingale_log_from_sum(p_values.len(), s)
}

/// Sliding window of the last `capacity` log p-values with a running sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleState {
    window: VecDeque<f64>,
    sum: f64,
    capacity: usize,
    pushes: u64,
}

impl MartingaleState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("window size must be positive".into()));
        }
        Ok(Self {
            window: VecDeque::with_capacity(capacity),
            sum: 0.0,
            capacity,
            pushes: 0,
        })
    }

    /// Window pre-filled with p-values drawn uniformly from (0, 1].
    pub fn warmed_up<R: Rng + ?Sized>(capacity: usize, rng: &mut R) -> Result<Self> {
        let mut state = Self::new(capacity)?;
        for _ in 0..capacity {
            // 1 - [0, 1) is (0, 1]
            let p = 1.0 - rng.random::<f64>();
            state.push(p)?;
        }
        Ok(state)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.window.len() == self.capacity
    }

    /// Running `sum log p` over the window.
    pub fn log_sum(&self) -> f64 {
        self.sum
    }

    /// Log p-values in arrival order.
    pub fn log_p_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    /// Adds the newest p-value and evicts the oldest once the window is full.
    pub fn push(&mut self, p: f64) -> Result<()> {
        check_p(p)?;
        let lp = p.ln();
        if self.window.len() == self.capacity {
            let old = self.window.pop_front().expect("full window");
            self.sum -= old;
        }
        self.window.push_back(lp);
        self.sum += lp;
        self.pushes += 1;
        if self.pushes % RESUM_PERIOD == 0 {
            self.sum = self.window.iter().sum();
        }
        // rounding can leave a tiny positive residue when every p is 1
        if self.sum > 0.0 {
            self.sum = 0.0;
        }
        Ok(())
    }

    /// `log M` of the current window.
    pub fn mixture_log(&self) -> Result<f64> {
        mixture_martingale_log_from_sum(self.window.len(), self.sum)
    }
}
