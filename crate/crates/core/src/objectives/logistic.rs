//! L2-regularized logistic regression with ±1 labels:
//! `f_i(w) = log(1 + exp(-y_i <w, x_i>)) + (λ/2)‖w‖²`.

use crate::data::{Dataset, Labels};
use crate::rng::RandomnessSource;
use rand::Rng;

/// `log(1 + exp(z))` evaluated without overflow for large |z|.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic sigmoid, branching on the sign to stay in [0, 1] exactly.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Adds `∇f_i(w) = -σ(-y_i m) y_i x_i + λ w` into `grad_acc` (with
/// `m = <w, x_i>`), returns `f_i(w)`.
pub(super) fn accumulate(
    lambda: f64,
    data: &Dataset,
    w: &[f64],
    i: usize,
    grad_acc: &mut [f64],
) -> f64 {
    let x = data.feature(i);
    let y = match data.labels() {
        Labels::Sign(v) => f64::from(v[i]),
        _ => unreachable!("label kind checked by the caller"),
    };
    let margin: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * y;
    let w_norm_sq: f64 = w.iter().map(|v| v * v).sum();
    let value = softplus(-margin) + 0.5 * lambda * w_norm_sq;
    let coeff = -y * sigmoid(-margin);
    for k in 0..w.len() {
        grad_acc[k] += coeff * x[k] + lambda * w[k];
    }
    value
}

/// Upper bound on the smoothness of F via power iteration on
/// `H = (1/4n) XᵀX + λ I`, which dominates the Hessian everywhere
/// (σ'(z) <= 1/4). Returns the Rayleigh quotient after `iters` sweeps.
pub(super) fn smoothness_bound(
    data: &Dataset,
    lambda: f64,
    iters: usize,
    rng: &mut RandomnessSource,
) -> f64 {
    let d = data.d_in();
    let n = data.n();
    let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    v.iter_mut().for_each(|x| *x /= norm);

    let mut rayleigh = lambda;
    for _ in 0..iters {
        // u = Xv, then Hv = Xᵀu / (4n) + λv
        let mut hv = vec![0.0; d];
        for i in 0..n {
            let x = data.feature(i);
            let dot: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
            for k in 0..d {
                hv[k] += x[k] * dot;
            }
        }
        for k in 0..d {
            hv[k] = hv[k] / (4.0 * n as f64) + lambda * v[k];
        }
        rayleigh = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let norm = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return lambda;
        }
        for k in 0..d {
            v[k] = hv[k] / norm;
        }
    }
    rayleigh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &z in &[-5.0, -0.5, 0.0, 0.5, 5.0] {
            let naive = (1.0f64 + f64::exp(z)).ln();
            assert!((softplus(z) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn softplus_survives_extremes() {
        assert!(softplus(800.0).is_finite());
        assert!(softplus(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
    }
}
