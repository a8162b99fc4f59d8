//! Small descriptive statistics used by the harness and the tests.

/// Linear-interpolation quantile of unsorted data (`q` in `[0, 1]`).
pub fn quantile(data: &[f64], q: f64) -> f64 {
    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5)
}

/// `(min, Q1, Q2, Q3, max)`.
pub fn five_number_summary(data: &[f64]) -> [f64; 5] {
    let mut sorted = data.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile_sorted(&sorted, q))
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// the uniform distribution on `[0, 1]`.
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            (x - i as f64 / n).max((i + 1) as f64 / n - x)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at the 1% level, `1.6276 / sqrt(n)`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
