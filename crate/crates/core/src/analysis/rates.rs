//! Theoretical rate predictions and empirical rate exponents.
//!
//! Each convergence guarantee is evaluated term by term with all O(1)
//! constants set to 1; only exponents and ordering relations are meaningful,
//! never absolute bound values.

use crate::engine::{Metric, MetricsTrace};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Which convergence guarantee to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    /// Global shuffling, strongly convex and smooth.
    ShuffleStronglyConvex,
    /// Global shuffling, convex and Lipschitz.
    ShuffleConvex,
    /// Global shuffling, smooth non-convex.
    ShuffleNonConvex,
    /// Local shuffling, strongly convex: the `log n / n` floor picks up a
    /// factor M.
    LocalShuffleStronglyConvex,
    /// Insufficient global shuffling, convex.
    InsufficientShuffleConvex,
    /// Insufficient global shuffling, strongly convex.
    InsufficientShuffleStronglyConvex,
    /// Insufficient global shuffling, non-convex.
    InsufficientShuffleNonConvex,
    /// With-replacement sampling baseline, strongly convex.
    WithReplacementStronglyConvex,
}

/// Problem parameters a prediction may need. Missing required entries are
/// reported as errors naming the parameter.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RateParams {
    pub n: usize,
    pub workers: usize,
    pub batch: usize,
    pub epochs: usize,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    /// Shuffling error ε for the insufficient-shuffling bounds.
    pub epsilon: Option<f64>,
}

impl RateParams {
    fn kappa(&self) -> Result<f64> {
        self.kappa.ok_or(Error::MissingParameter { name: "kappa" })
    }

    fn rho(&self) -> Result<f64> {
        self.rho.ok_or(Error::MissingParameter { name: "rho" })
    }

    fn epsilon(&self) -> Result<f64> {
        self.epsilon
            .ok_or(Error::MissingParameter { name: "epsilon" })
    }
}

/// One bound term: a formula label, its magnitude at the given parameters,
/// and its polynomial decay exponent in S (equivalently, in effective
/// passes at fixed n, M, b).
#[derive(Debug, Clone, Serialize)]
pub struct RateTerm {
    pub name: &'static str,
    pub value: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatePrediction {
    pub theorem: TheoremId,
    /// Every term of the bound, in display order.
    pub terms: Vec<RateTerm>,
    /// Index into `terms` of the dominant (largest active) term.
    pub dominant: usize,
    /// Value of the whole bound with constants set to 1.
    pub bound_value: f64,
    /// Decay exponent of the dominant term.
    pub predicted_exponent: f64,
}

struct Ctx {
    n: f64,
    chunk: f64, // bM
    s: f64,
}

impl Ctx {
    fn new(p: &RateParams) -> Result<Self> {
        if p.n == 0 || p.workers == 0 || p.batch == 0 || p.epochs == 0 {
            return Err(Error::InvalidSpec(
                "rate parameters n, workers, batch, epochs must be >= 1".into(),
            ));
        }
        Ok(Self {
            n: p.n as f64,
            chunk: (p.workers * p.batch) as f64,
            s: p.epochs as f64,
        })
    }
}

fn term(name: &'static str, value: f64, exponent: f64) -> RateTerm {
    RateTerm {
        name,
        value,
        exponent,
    }
}

struct RatePrediction0 {
    terms: Vec<RateTerm>,
    dominant: usize,
    bound_value: f64,
}

/// Evaluate the displayed bound of a guarantee with all constants set
/// to 1: every term's magnitude, the dominant term, and its decay exponent
/// in S (at fixed n, M, b effective passes are proportional to S).
pub fn predict_rate(theorem: TheoremId, params: &RateParams) -> Result<RatePrediction> {
    let c = Ctx::new(params)?;
    let (n, chunk, s) = (c.n, c.chunk, c.s);
    let sn = s * n;
    let log_n = n.ln();
    let log_sn = sn.ln();

    let raw = match theorem {
        TheoremId::ShuffleStronglyConvex | TheoremId::LocalShuffleStronglyConvex => {
            let kappa = params.kappa()?;
            let floor_factor = if theorem == TheoremId::LocalShuffleStronglyConvex {
                c.chunk / params.batch as f64 // M
            } else {
                1.0
            };
            let floor_name = if theorem == TheoremId::LocalShuffleStronglyConvex {
                "M log(n)/n"
            } else {
                "log(n)/n"
            };
            min_plus_floor(
                term("bM/(Sn)", chunk / sn, -1.0),
                vec![
                    term(
                        "kappa^2 (bM)^2 log(Sn)/(Sn)^2",
                        kappa * kappa * chunk * chunk * log_sn / (sn * sn),
                        -2.0,
                    ),
                    term(
                        "kappa^2 bM log(n)/(S n^2)",
                        kappa * kappa * chunk * log_n / (s * n * n),
                        -1.0,
                    ),
                ],
                vec![term(floor_name, floor_factor * log_n / n, 0.0)],
            )
        }
        TheoremId::ShuffleConvex => sum_of(vec![
            term("1/sqrt(nS)", 1.0 / sn.sqrt(), -0.5),
            term("Mb/(nS)", chunk / sn, -1.0),
            term("sqrt(1/n)", (1.0 / n).sqrt(), 0.0),
        ]),
        TheoremId::ShuffleNonConvex => {
            let rho = params.rho()?;
            sum_of(vec![
                term("sqrt(rho ΔF/(Sn))", (rho / sn).sqrt(), -0.5),
                term("log(n)/n", log_n / n, 0.0),
            ])
        }
        TheoremId::InsufficientShuffleConvex => {
            let eps = params.epsilon()?;
            sum_of(vec![
                term("1/sqrt(Sn)", 1.0 / sn.sqrt(), -0.5),
                term("bM/(Sn)", chunk / sn, -1.0),
                term("sqrt(1/n)", (1.0 / n).sqrt(), 0.0),
                term("eps ln(n)", eps * log_n, 0.0),
            ])
        }
        TheoremId::InsufficientShuffleStronglyConvex => {
            let kappa = params.kappa()?;
            let eps = params.epsilon()?;
            min_plus_floor(
                term("bM/(Sn)", chunk / sn, -1.0),
                vec![
                    term(
                        "kappa^2 (bM)^2 log(Sn)/(Sn)^2",
                        kappa * kappa * chunk * chunk * log_sn / (sn * sn),
                        -2.0,
                    ),
                    term(
                        "kappa^2 bM log(n)/(S n^2)",
                        kappa * kappa * chunk * log_n / (s * n * n),
                        -1.0,
                    ),
                    term(
                        "kappa^2 n eps^2/(S bM)",
                        kappa * kappa * n * eps * eps / (s * chunk),
                        -1.0,
                    ),
                ],
                vec![
                    term("log(n)/n", log_n / n, 0.0),
                    term("n eps^2/(bM)", n * eps * eps / chunk, 0.0),
                ],
            )
        }
        TheoremId::InsufficientShuffleNonConvex => {
            let eps = params.epsilon()?;
            sum_of(vec![
                term("sqrt(1/(Sn))", 1.0 / sn.sqrt(), -0.5),
                term("log(n)/n", log_n / n, 0.0),
                term("n eps^2/(bM)", n * eps * eps / chunk, 0.0),
            ])
        }
        TheoremId::WithReplacementStronglyConvex => {
            let kappa = params.kappa()?;
            min_plus_floor(
                term("bM/(nS)", chunk / sn, -1.0),
                vec![term(
                    "kappa^2 (bM)^2 log(Sn)/(Sn)^2",
                    kappa * kappa * chunk * chunk * log_sn / (sn * sn),
                    -2.0,
                )],
                vec![term("1/(Sn)", 1.0 / sn, -1.0)],
            )
        }
    };

    let predicted_exponent = raw.terms[raw.dominant].exponent;
    Ok(RatePrediction {
        theorem,
        terms: raw.terms,
        dominant: raw.dominant,
        bound_value: raw.bound_value,
        predicted_exponent,
    })
}

/// A bound that is a plain sum of terms: dominant = largest.
fn sum_of(terms: Vec<RateTerm>) -> RatePrediction0 {
    let bound_value = terms.iter().map(|t| t.value).sum();
    let dominant = terms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map(|(i, _)| i)
        .expect("non-empty bound");
    RatePrediction0 {
        terms,
        dominant,
        bound_value,
    }
}

/// A bound of shape `min{linear, Σ quadratic} + Σ floor`. The dominant term
/// is the largest among the active ones: the chosen min-branch's terms plus
/// the floor terms.
fn min_plus_floor(
    linear: RateTerm,
    quadratic: Vec<RateTerm>,
    floor: Vec<RateTerm>,
) -> RatePrediction0 {
    let quad_sum: f64 = quadratic.iter().map(|t| t.value).sum();
    let floor_sum: f64 = floor.iter().map(|t| t.value).sum();
    let take_linear = linear.value <= quad_sum;
    let bound_value = linear.value.min(quad_sum) + floor_sum;

    let mut terms = vec![linear];
    let quad_idx: Vec<usize> = (1..=quadratic.len()).collect();
    terms.extend(quadratic);
    let floor_idx: Vec<usize> = (terms.len()..terms.len() + floor.len()).collect();
    terms.extend(floor);

    let mut active: Vec<usize> = if take_linear { vec![0] } else { quad_idx };
    active.extend(floor_idx);
    let dominant = active
        .into_iter()
        .max_by(|&a, &b| terms[a].value.total_cmp(&terms[b].value))
        .expect("non-empty bound");
    RatePrediction0 {
        terms,
        dominant,
        bound_value,
    }
}

/// Ordinary-least-squares slope of `log(metric)` against
/// `log(effective_passes)`.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    pub slope: f64,
    pub points_used: usize,
    /// Points in the window dropped because the metric was not positive.
    pub points_excluded: usize,
}

/// Log-log slope of a trace metric over a window of record indices.
pub fn rate_exponent(
    trace: &MetricsTrace,
    metric: Metric,
    window: Range<usize>,
) -> Result<SlopeReport> {
    let series = trace.series(metric);
    let start = window.start.min(series.len());
    let end = window.end.min(series.len());
    slope_of_series(&series[start..end])
}

/// Log-log OLS slope of a `(passes, value)` series; non-positive values are
/// excluded (and counted), and at least 10 usable points are required.
pub fn slope_of_series(series: &[(f64, f64)]) -> Result<SlopeReport> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let excluded = series.len() - points.len();
    if points.len() < 10 {
        return Err(Error::InsufficientPoints {
            have: points.len(),
            need: 10,
        });
    }
    let k = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in &points {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints {
            have: 1,
            need: 10,
        });
    }
    Ok(SlopeReport {
        slope: sxy / sxx,
        points_used: points.len(),
        points_excluded: excluded,
    })
}
