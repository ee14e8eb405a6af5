//! Quadratic family: `f_i(w) = ½ (w - c_i)ᵀ diag(a) (w - c_i)`.
//!
//! The shared diagonal spectrum `a` makes μ (its minimum), ρ (its maximum)
//! and κ exact, and the minimizer of F is the mean of the centers.

use crate::data::Dataset;

/// Adds `∇f_i(w) = diag(a)(w - c_i)` into `grad_acc`, returns `f_i(w)`.
pub(super) fn accumulate(
    spectrum: &[f64],
    data: &Dataset,
    w: &[f64],
    i: usize,
    grad_acc: &mut [f64],
) -> f64 {
    let center = data.feature(i);
    let mut value = 0.0;
    for k in 0..w.len() {
        let diff = w[k] - center[k];
        value += 0.5 * spectrum[k] * diff * diff;
        grad_acc[k] += spectrum[k] * diff;
    }
    value
}
