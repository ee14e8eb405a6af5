//! Quantitative verification layer: exact shuffling error, conditional-gap
//! checks, sampled expectation identities, rate predictions, empirical rate
//! exponents, and speedup measurement.
//!
//! Reports serialize to JSON (one record per check) and display as
//! human-readable one-liners.

mod rates;

pub use rates::{
    predict_rate, rate_exponent, slope_of_series, RateParams, RatePrediction, RateTerm,
    SlopeReport, TheoremId,
};

use crate::engine::{Metric, MetricsTrace};
use crate::error::{Error, Result};
use crate::rng::RandomnessSource;
use crate::schedule::{conditional_from_distribution, BatchTuple, Regime, StreamSpec};
use crate::shuffling::{
    enumerate_distribution, factorial, permutation_rank, shuffle, ShufflerSpec,
};
use serde::Serialize;
use std::collections::BTreeMap;

/// Central finite differences of a scalar function, step `h` per coordinate.
pub fn finite_difference_gradient<F>(mut f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut perturbed = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for k in 0..point.len() {
        perturbed[k] = point[k] + h;
        let plus = f(&perturbed);
        perturbed[k] = point[k] - h;
        let minus = f(&perturbed);
        perturbed[k] = point[k];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvMethod {
    ExactEnumeration,
    Empirical,
}

/// Shuffling error ε: total-variation distance between the shuffler's
/// output distribution and the uniform distribution over all n! orderings.
#[derive(Debug, Clone, Serialize)]
pub struct ShufflingErrorReport {
    pub epsilon: f64,
    pub method: TvMethod,
    pub n: usize,
    pub shuffler: ShufflerSpec,
    pub trials: Option<usize>,
    /// Caveats about the estimate, when any apply.
    pub note: Option<String>,
}

/// Exact ε by exhaustive enumeration: `ε = ½ Σ_π |1/n! - v_π|`.
pub fn tv_exact(spec: &ShufflerSpec, n: usize) -> Result<ShufflingErrorReport> {
    let dist = enumerate_distribution(spec, n)?;
    Ok(ShufflingErrorReport {
        epsilon: dist.tv_to_uniform(),
        method: TvMethod::ExactEnumeration,
        n,
        shuffler: *spec,
        trials: None,
        note: None,
    })
}

/// Plug-in ε from an empirical histogram of sampled permutations. The
/// plug-in total variation is biased upward at finite sample sizes; exact
/// enumeration is the authoritative path at small n.
pub fn tv_empirical(
    spec: &ShufflerSpec,
    n: usize,
    trials: usize,
    rng: &mut RandomnessSource,
) -> Result<ShufflingErrorReport> {
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be >= 1".into()));
    }
    if n > 8 {
        return Err(Error::InvalidSpec(
            "empirical TV needs a histogram over n! cells; use n <= 8".into(),
        ));
    }
    let cells = factorial(n);
    let mut counts = vec![0usize; cells];
    for _ in 0..trials {
        let perm = shuffle(spec, n, rng)?;
        counts[permutation_rank(perm.as_slice())] += 1;
    }
    let u = 1.0 / cells as f64;
    let epsilon = 0.5
        * counts
            .iter()
            .map(|&c| (c as f64 / trials as f64 - u).abs())
            .sum::<f64>();
    Ok(ShufflingErrorReport {
        epsilon,
        method: TvMethod::Empirical,
        n,
        shuffler: *spec,
        trials: Some(trials),
        note: Some(
            "plug-in TV estimate; biased upward at finite sample sizes".into(),
        ),
    })
}

/// Result of checking the conditional-probability gap bound
/// `|P_{v|t}(B) - P_{u|t}(B)| <= 4nε / (n - bMt)` for an insufficient
/// shuffler, over every admissible history of length `t` and every
/// candidate tuple whose conditioning event has positive probability.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalGapReport {
    pub shuffler: ShufflerSpec,
    pub n: usize,
    pub workers: usize,
    pub batch: usize,
    pub t: usize,
    pub epsilon: f64,
    /// Whether ε <= bM/n, the premise under which the bound is claimed.
    pub precondition_ok: bool,
    pub max_gap: f64,
    pub bound: f64,
    pub pass: bool,
    pub histories: usize,
    pub candidates: usize,
}

/// Exhaustively verify the conditional-gap bound at history length `t`.
/// Requires `t + 1 < T`; at `t = T - 1` the next tuple is forced and the
/// bound is not claimed.
pub fn check_conditional_gap(
    shuffler: &ShufflerSpec,
    n: usize,
    workers: usize,
    batch: usize,
    t: usize,
) -> Result<ConditionalGapReport> {
    let spec = StreamSpec {
        regime: Regime::GlobalShuffle,
        n,
        workers,
        batch,
        epochs: 1,
        shuffler: *shuffler,
        seed: 0,
    };
    spec.validate()?;
    let iters = spec.iters_per_epoch();
    if t + 1 >= iters {
        return Err(Error::InvalidSpec(format!(
            "need t + 1 < T (t = {t}, T = {iters})"
        )));
    }

    let epsilon = tv_exact(shuffler, n)?.epsilon;
    let chunk = (workers * batch) as f64;
    let precondition_ok = epsilon <= chunk / n as f64;
    let bound = 4.0 * n as f64 * epsilon / (n as f64 - chunk * t as f64);
    let uniform_value = 1.0 / (iters - t) as f64;

    let dist = enumerate_distribution(shuffler, n)?;
    // Admissible histories = slot prefixes of length t over the support.
    let mut histories: Vec<Vec<BatchTuple>> = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        for (perm, p) in dist.iter() {
            if p == 0.0 {
                continue;
            }
            let hist: Vec<BatchTuple> = slots_prefix(&perm, workers, batch, t);
            if seen.insert(hist.clone()) {
                histories.push(hist);
            }
        }
    }

    let mut max_gap: f64 = 0.0;
    let mut candidates = 0usize;
    for history in &histories {
        let cond = conditional_from_distribution(&dist, &spec, history)?;
        for (_, p) in &cond.entries {
            candidates += 1;
            max_gap = max_gap.max((p - uniform_value).abs());
        }
    }

    Ok(ConditionalGapReport {
        shuffler: *shuffler,
        n,
        workers,
        batch,
        t,
        epsilon,
        precondition_ok,
        max_gap,
        bound,
        pass: max_gap <= bound + 1e-12,
        histories: histories.len(),
        candidates,
    })
}

fn slots_prefix(deck: &[usize], workers: usize, batch: usize, t: usize) -> Vec<BatchTuple> {
    let block = deck.len() / workers;
    (0..t)
        .map(|slot| {
            (0..workers)
                .map(|m| {
                    let mut b: Vec<usize> =
                        deck[m * block + slot * batch..m * block + (slot + 1) * batch].to_vec();
                    b.sort_unstable();
                    b
                })
                .collect()
        })
        .collect()
}

/// Monte-Carlo check of the permuted-prefix expectation identity: over a
/// uniform random permutation σ,
///
/// ```text
/// E[ (1/n) Σ_i s_i - (1/b) Σ_{j=1..b} s_{σ(tb+j)} ]
///   = (tb/n) · E[ mean(s_{σ(1..tb)}) - mean(s_{σ(tb+1..n)}) ]
/// ```
///
/// Both sides are estimated from the same sampled permutations and compared
/// through the per-trial difference, which has mean exactly zero.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectationIdentityReport {
    pub n: usize,
    pub batch: usize,
    pub t: usize,
    pub trials: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub mean_diff: f64,
    pub std_error: f64,
    pub pass: bool,
}

pub fn verify_lemma31(
    values: &[f64],
    batch: usize,
    t: usize,
    trials: usize,
    rng: &mut RandomnessSource,
) -> Result<ExpectationIdentityReport> {
    let n = values.len();
    if batch == 0 || t * batch + batch > n {
        return Err(Error::InvalidSpec(format!(
            "need b >= 1 and t*b + b <= n (b = {batch}, t = {t}, n = {n})"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidSpec("trials must be >= 1".into()));
    }

    let total_mean = values.iter().sum::<f64>() / n as f64;
    let prefix = t * batch;
    let uniform = ShufflerSpec::fisher_yates();

    let mut lhs_sum = 0.0;
    let mut rhs_sum = 0.0;
    let mut diff_sum = 0.0;
    let mut diff_sq_sum = 0.0;
    for _ in 0..trials {
        let perm = shuffle(&uniform, n, rng)?;
        let order = perm.as_slice();
        let batch_mean = order[prefix..prefix + batch]
            .iter()
            .map(|&i| values[i])
            .sum::<f64>()
            / batch as f64;
        let lhs = total_mean - batch_mean;

        let rhs = if prefix == 0 {
            0.0
        } else {
            let head = order[..prefix].iter().map(|&i| values[i]).sum::<f64>()
                / prefix as f64;
            let tail = order[prefix..].iter().map(|&i| values[i]).sum::<f64>()
                / (n - prefix) as f64;
            (prefix as f64 / n as f64) * (head - tail)
        };

        let d = lhs - rhs;
        lhs_sum += lhs;
        rhs_sum += rhs;
        diff_sum += d;
        diff_sq_sum += d * d;
    }

    let k = trials as f64;
    let mean_diff = diff_sum / k;
    let var = (diff_sq_sum / k - mean_diff * mean_diff).max(0.0);
    let std_error = (var / k).sqrt();
    // The absolute floor absorbs pure floating-point rounding in the
    // degenerate combinations where the identity holds exactly per trial.
    let pass = mean_diff.abs() <= 4.0 * std_error + 1e-12;
    Ok(ExpectationIdentityReport {
        n,
        batch,
        t,
        trials,
        lhs: lhs_sum / k,
        rhs: rhs_sum / k,
        mean_diff,
        std_error,
        pass,
    })
}

/// First effective-pass count at which a trace's metric drops to or below
/// the target; `None` if it never does.
pub fn epochs_to_target(trace: &MetricsTrace, metric: Metric, target: f64) -> Option<f64> {
    trace
        .series(metric)
        .into_iter()
        .find(|&(_, v)| v <= target)
        .map(|(passes, _)| passes)
}

/// Speedup of `M` workers relative to the single-worker baseline:
/// `α_M = epochs_M / epochs_1`, `speedup_M = M / α_M`.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedupRow {
    pub workers: usize,
    pub epochs_to_target: Option<f64>,
    pub alpha: Option<f64>,
    pub speedup: Option<f64>,
}

/// Per-worker-count speedups at a target metric level. Requires the `M = 1`
/// baseline; traces that never reach the target are flagged with `None`
/// rather than given a fabricated value.
pub fn speedup(
    traces: &BTreeMap<usize, MetricsTrace>,
    target: f64,
    metric: Metric,
) -> Result<Vec<SpeedupRow>> {
    let base_trace = traces
        .get(&1)
        .ok_or_else(|| Error::InvalidSpec("speedup needs the M = 1 baseline trace".into()))?;
    let base = epochs_to_target(base_trace, metric, target);
    let mut rows = Vec::with_capacity(traces.len());
    for (&workers, trace) in traces {
        let epochs = epochs_to_target(trace, metric, target);
        let (alpha, ratio) = match (base, epochs) {
            (Some(b), Some(e)) if b > 0.0 => {
                let alpha = e / b;
                (Some(alpha), Some(workers as f64 / alpha))
            }
            _ => (None, None),
        };
        rows.push(SpeedupRow {
            workers,
            epochs_to_target: epochs,
            alpha,
            speedup: ratio,
        });
    }
    Ok(rows)
}
