use super::{Gradients, Mlp};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Flat index (in [`Gradients::flatten`] order) of the worst parameter.
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Step used for the central differences.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Relative error below this denominator is measured absolutely, so that
/// parameters with vanishing gradient do not amplify rounding noise.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// Compares `analytic` with central differences of `loss` around the current
/// parameters of `net`. Parameters are restored afterwards.
pub fn grad_check<F>(net: &mut Mlp, analytic: &Gradients, mut loss: F, tolerance: f64) -> GradCheckReport
where
    F: FnMut(&Mlp) -> f64,
{
    let base = net.flat_params();
    let flat = analytic.flatten();
    assert_eq!(flat.len(), base.len(), "gradient shape must match parameters");

    let mut params = base.clone();
    let mut worst = 0.0f64;
    let mut worst_index = 0;
    for i in 0..base.len() {
        params[i] = base[i] + GRAD_CHECK_STEP;
        net.set_flat_params(&params).expect("same shape");
        let up = loss(net);
        params[i] = base[i] - GRAD_CHECK_STEP;
        net.set_flat_params(&params).expect("same shape");
        let down = loss(net);
        params[i] = base[i];

        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let denom = flat[i].abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        let err = (flat[i] - numeric).abs() / denom;
        if !(err <= worst) {
            worst = err;
            worst_index = i;
        }
    }
    net.set_flat_params(&base).expect("same shape");

    GradCheckReport {
        max_relative_error: worst,
        worst_index,
        checked: base.len(),
        tolerance,
        passed: worst < tolerance,
    }
}
