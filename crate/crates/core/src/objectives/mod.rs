//! Objective families: per-sample losses `f_i(w)`, the empirical risk
//! `F(w) = (1/n) Σ f_i(w)`, gradients, and the convexity/smoothness
//! constants each family admits.
//!
//! Three families are provided:
//!
//! - **Quadratic**: `F(w) = (1/n) Σ ½ (w - c_i)ᵀ diag(a) (w - c_i)` with a
//!   shared diagonal spectrum `a`, so the strong-convexity and smoothness
//!   constants are exact by construction and the minimizer is closed-form.
//!   The centers `c_i` are the dataset's feature vectors.
//! - **LogisticL2**: `f_i(w) = log(1 + exp(-y_i <w, x_i>)) + (λ/2)‖w‖²`.
//! - **Mlp**: a small fully-connected classifier with softmax cross-entropy.
//!
//! The L2 term enters every per-sample loss in full (not `1/n` of it), so
//! the average of per-sample losses reproduces `F` and every minibatch
//! gradient has the same functional form as `∇F`.

mod logistic;
mod mlp;
mod quadratic;

pub use mlp::MlpLayout;

use crate::data::{Dataset, Labels};
use crate::error::{Error, Result};
use crate::rng::RandomnessSource;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Flat real-valued parameter state of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Squared Euclidean distance to another vector of the same dimension.
    pub fn dist_sq(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Loss value together with its gradient (same shape as the parameters).
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl GradientReport {
    pub fn grad_norm_sq(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveFamily {
    /// Shared diagonal curvature `spectrum`; centers come from the dataset.
    Quadratic { spectrum: Vec<f64> },
    /// Regularization weight `lambda` (λ).
    LogisticL2 { lambda: f64 },
    /// Fully-connected net: `input_dim -> hidden... -> classes`, softmax
    /// cross-entropy loss.
    Mlp {
        input_dim: usize,
        hidden: Vec<usize>,
        classes: usize,
        activation: Activation,
    },
}

impl ObjectiveFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveFamily::Quadratic { .. } => "quadratic",
            ObjectiveFamily::LogisticL2 { .. } => "logistic-l2",
            ObjectiveFamily::Mlp { .. } => "mlp",
        }
    }
}

/// Convexity/smoothness constants of `F`. Each is `Some` only when defined
/// for the family; estimated values are lower bounds of the true suprema.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ObjectiveConstants {
    /// Strong-convexity coefficient μ.
    pub strong_convexity: Option<f64>,
    /// Smoothness coefficient ρ.
    pub smoothness: Option<f64>,
    /// Condition number κ = ρ/μ.
    pub condition_number: Option<f64>,
    /// Lipschitz bound L of F itself (equals sup ‖∇F‖ for differentiable F).
    pub lipschitz: Option<f64>,
    /// B²: bound on per-sample squared gradient norms ‖∇f_i‖².
    pub per_sample_grad_sq: Option<f64>,
    /// G²: bound on the full squared gradient norm ‖∇F‖².
    pub full_grad_sq: Option<f64>,
    /// How the non-exact entries were obtained.
    pub estimated_by: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub family: ObjectiveFamily,
    pub constants: ObjectiveConstants,
}

impl ObjectiveSpec {
    /// Quadratic with the given diagonal spectrum; μ, ρ, κ are exact.
    pub fn quadratic(spectrum: Vec<f64>) -> Result<Self> {
        if spectrum.is_empty() || spectrum.iter().any(|&a| a <= 0.0 || !a.is_finite()) {
            return Err(Error::InvalidSpec(
                "quadratic spectrum must be non-empty and strictly positive".into(),
            ));
        }
        let mu = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        let rho = spectrum.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            family: ObjectiveFamily::Quadratic { spectrum },
            constants: ObjectiveConstants {
                strong_convexity: Some(mu),
                smoothness: Some(rho),
                condition_number: Some(rho / mu),
                ..Default::default()
            },
        })
    }

    /// Spectrum linearly spaced on `[1, kappa]`, giving condition number
    /// exactly `kappa`.
    pub fn quadratic_with_condition(dim: usize, kappa: f64) -> Result<Self> {
        if dim == 0 || kappa < 1.0 {
            return Err(Error::InvalidSpec(
                "need dim >= 1 and condition number >= 1".into(),
            ));
        }
        let spectrum = if dim == 1 {
            vec![kappa]
        } else {
            (0..dim)
                .map(|k| 1.0 + (kappa - 1.0) * k as f64 / (dim - 1) as f64)
                .collect()
        };
        Self::quadratic(spectrum)
    }

    /// L2-regularized logistic regression; λ > 0 makes F λ-strongly convex.
    pub fn logistic_l2(lambda: f64) -> Result<Self> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidSpec("lambda must be finite and >= 0".into()));
        }
        Ok(Self {
            family: ObjectiveFamily::LogisticL2 { lambda },
            constants: ObjectiveConstants {
                strong_convexity: (lambda > 0.0).then_some(lambda),
                ..Default::default()
            },
        })
    }

    pub fn mlp(
        input_dim: usize,
        hidden: Vec<usize>,
        classes: usize,
        activation: Activation,
    ) -> Result<Self> {
        MlpLayout::new(input_dim, &hidden, classes)?;
        Ok(Self {
            family: ObjectiveFamily::Mlp {
                input_dim,
                hidden,
                classes,
                activation,
            },
            constants: ObjectiveConstants::default(),
        })
    }

    /// Parameter dimension for this family over the given dataset.
    pub fn param_dim(&self, data: &Dataset) -> Result<usize> {
        match &self.family {
            ObjectiveFamily::Quadratic { spectrum } => {
                if spectrum.len() != data.d_in() {
                    return Err(Error::DimensionMismatch {
                        expected: data.d_in(),
                        got: spectrum.len(),
                    });
                }
                Ok(data.d_in())
            }
            ObjectiveFamily::LogisticL2 { .. } => Ok(data.d_in()),
            ObjectiveFamily::Mlp {
                input_dim,
                hidden,
                classes,
                ..
            } => {
                if *input_dim != data.d_in() {
                    return Err(Error::DimensionMismatch {
                        expected: data.d_in(),
                        got: *input_dim,
                    });
                }
                Ok(MlpLayout::new(*input_dim, hidden, *classes)?.param_dim())
            }
        }
    }

    /// Default initial point: zeros for the convex families, a small
    /// fixed-seed Gaussian (scale 0.1) for the MLP.
    pub fn initial_point(&self, data: &Dataset, seed: u64) -> Result<ParamVector> {
        let dim = self.param_dim(data)?;
        match &self.family {
            ObjectiveFamily::Mlp { .. } => {
                let mut rng = RandomnessSource::from_seed(seed);
                let values = (0..dim)
                    .map(|_| 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                    .collect();
                Ok(ParamVector::new(values))
            }
            _ => Ok(ParamVector::zeros(dim)),
        }
    }

    fn check_labels(&self, data: &Dataset) -> Result<()> {
        let ok = matches!(
            (&self.family, data.labels()),
            (ObjectiveFamily::Quadratic { .. }, Labels::Real(_))
                | (ObjectiveFamily::LogisticL2 { .. }, Labels::Sign(_))
                | (ObjectiveFamily::Mlp { .. }, Labels::Class(_))
        );
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "label kind does not match the {} family",
                self.family.name()
            )))
        }
    }
}

/// Scratch buffers reused across per-sample evaluations.
enum Workspace {
    None,
    Mlp(mlp::MlpScratch),
}

fn make_workspace(spec: &ObjectiveSpec) -> Result<Workspace> {
    Ok(match &spec.family {
        ObjectiveFamily::Mlp {
            input_dim,
            hidden,
            classes,
            ..
        } => Workspace::Mlp(mlp::MlpScratch::new(&MlpLayout::new(
            *input_dim, hidden, *classes,
        )?)),
        _ => Workspace::None,
    })
}

/// Evaluate `f_i(w)` and add `∇f_i(w)` into `grad_acc`.
fn accumulate_sample(
    spec: &ObjectiveSpec,
    data: &Dataset,
    w: &[f64],
    i: usize,
    grad_acc: &mut [f64],
    ws: &mut Workspace,
) -> Result<f64> {
    match (&spec.family, ws) {
        (ObjectiveFamily::Quadratic { spectrum }, _) => {
            Ok(quadratic::accumulate(spectrum, data, w, i, grad_acc))
        }
        (ObjectiveFamily::LogisticL2 { lambda }, _) => {
            Ok(logistic::accumulate(*lambda, data, w, i, grad_acc))
        }
        (
            ObjectiveFamily::Mlp {
                input_dim,
                hidden,
                classes,
                activation,
            },
            Workspace::Mlp(scratch),
        ) => {
            let layout = MlpLayout::new(*input_dim, hidden, *classes)?;
            Ok(mlp::accumulate(
                &layout,
                *activation,
                data,
                w,
                i,
                grad_acc,
                scratch,
            ))
        }
        _ => unreachable!("workspace built for a different family"),
    }
}

fn check_eval_preconditions(
    spec: &ObjectiveSpec,
    data: &Dataset,
    w: &ParamVector,
) -> Result<usize> {
    spec.check_labels(data)?;
    let dim = spec.param_dim(data)?;
    if w.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.dim(),
        });
    }
    Ok(dim)
}

/// `f_i(w)` and `∇f_i(w)` for one sample. The full L2 term is included.
pub fn loss_and_grad_single(
    spec: &ObjectiveSpec,
    data: &Dataset,
    w: &ParamVector,
    i: usize,
) -> Result<GradientReport> {
    let dim = check_eval_preconditions(spec, data, w)?;
    data.check_index(i)?;
    let mut gradient = vec![0.0; dim];
    let mut ws = make_workspace(spec)?;
    let value = accumulate_sample(spec, data, w.as_slice(), i, &mut gradient, &mut ws)?;
    Ok(GradientReport { value, gradient })
}

/// Sum (not mean) of per-sample losses and gradients over `indices` — the
/// quantity a worker pushes to the master; averaging happens in the engine.
/// `indices` may repeat under i.i.d. sampling; repeats count multiply.
pub fn loss_and_grad_batch(
    spec: &ObjectiveSpec,
    data: &Dataset,
    w: &ParamVector,
    indices: &[usize],
) -> Result<GradientReport> {
    if indices.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = check_eval_preconditions(spec, data, w)?;
    let mut gradient = vec![0.0; dim];
    let mut value = 0.0;
    let mut ws = make_workspace(spec)?;
    for &i in indices {
        data.check_index(i)?;
        value += accumulate_sample(spec, data, w.as_slice(), i, &mut gradient, &mut ws)?;
    }
    Ok(GradientReport { value, gradient })
}

/// `F(w) = (1/n) Σ f_i(w)` and its gradient.
pub fn full_objective(
    spec: &ObjectiveSpec,
    data: &Dataset,
    w: &ParamVector,
) -> Result<GradientReport> {
    let dim = check_eval_preconditions(spec, data, w)?;
    let mut gradient = vec![0.0; dim];
    let mut value = 0.0;
    let mut ws = make_workspace(spec)?;
    for i in 0..data.n() {
        value += accumulate_sample(spec, data, w.as_slice(), i, &mut gradient, &mut ws)?;
    }
    let inv_n = 1.0 / data.n() as f64;
    value *= inv_n;
    for g in &mut gradient {
        *g *= inv_n;
    }
    Ok(GradientReport { value, gradient })
}

/// A parameter point drawn uniformly from the L2 ball of the given radius.
fn sample_in_ball(dim: usize, radius: f64, rng: &mut RandomnessSource) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let u: f64 = rng.random::<f64>();
    let r = radius * u.powf(1.0 / dim as f64);
    for x in &mut v {
        *x *= r / norm;
    }
    v
}

/// Estimate the gradient-norm bounds B² and G² as maxima of squared gradient
/// norms over `sample_count` random points within `radius` of the origin.
/// Families with exact constants keep them; estimates are lower bounds of
/// the true suprema, and the method is recorded in the returned spec.
///
/// For the MLP this also produces a sampled estimate of the smoothness ρ
/// (max observed `‖∇F(w) - ∇F(w')‖ / ‖w - w'‖` over nearby pairs), and for
/// logistic regression ρ comes from a power-iteration bound on the Hessian.
pub fn estimate_constants(
    spec: &ObjectiveSpec,
    data: &Dataset,
    sample_count: usize,
    radius: f64,
    rng: &mut RandomnessSource,
) -> Result<ObjectiveSpec> {
    if sample_count == 0 {
        return Err(Error::InvalidSpec("sample_count must be >= 1".into()));
    }
    if radius <= 0.0 || !radius.is_finite() {
        return Err(Error::InvalidSpec("radius must be positive".into()));
    }
    spec.check_labels(data)?;
    let dim = spec.param_dim(data)?;

    let mut b_sq: f64 = 0.0;
    let mut g_sq: f64 = 0.0;
    let mut rho_sampled: f64 = 0.0;
    let mut ws = make_workspace(spec)?;
    let mut grad = vec![0.0; dim];

    for _ in 0..sample_count {
        let point = ParamVector::new(sample_in_ball(dim, radius, rng));
        for i in 0..data.n() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            accumulate_sample(spec, data, point.as_slice(), i, &mut grad, &mut ws)?;
            let norm_sq: f64 = grad.iter().map(|g| g * g).sum();
            b_sq = b_sq.max(norm_sq);
        }
        let full = full_objective(spec, data, &point)?;
        g_sq = g_sq.max(full.grad_norm_sq());

        if matches!(spec.family, ObjectiveFamily::Mlp { .. }) {
            // Secant estimate of the gradient's Lipschitz constant.
            let step = 1e-3 * radius.max(1.0);
            let mut nearby = point.clone();
            for x in nearby.as_mut_slice() {
                *x += step * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
                    / (dim as f64).sqrt();
            }
            let other = full_objective(spec, data, &nearby)?;
            let dw = point.dist_sq(&nearby).sqrt();
            if dw > 0.0 {
                let dg = full
                    .gradient
                    .iter()
                    .zip(&other.gradient)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                rho_sampled = rho_sampled.max(dg / dw);
            }
        }
    }

    let mut out = spec.clone();
    out.constants.per_sample_grad_sq = Some(b_sq);
    out.constants.full_grad_sq = Some(g_sq);
    out.constants.lipschitz = Some(g_sq.sqrt());
    match &spec.family {
        ObjectiveFamily::Quadratic { .. } => {} // exact μ, ρ, κ already set
        ObjectiveFamily::LogisticL2 { lambda } => {
            let rho = logistic::smoothness_bound(data, *lambda, 200, rng);
            out.constants.smoothness = Some(rho);
            if let Some(mu) = out.constants.strong_convexity {
                out.constants.condition_number = Some(rho / mu);
            }
        }
        ObjectiveFamily::Mlp { .. } => {
            out.constants.smoothness = Some(rho_sampled);
        }
    }
    out.constants.estimated_by = Some(format!(
        "max over {sample_count} uniform points in the radius-{radius} ball, seed-derived"
    ));
    Ok(out)
}

/// A certified reference optimum `(w*, F*)`.
#[derive(Debug, Clone)]
pub struct ReferenceOptimum {
    pub w_star: ParamVector,
    pub f_star: f64,
}

/// Solve for the reference optimum.
///
/// Quadratic: closed form (mean of centers under the shared curvature).
/// LogisticL2: full-gradient descent until `‖∇F(w)‖ <= tolerance`.
/// Mlp: rejected — no certified optimum exists.
pub fn solve_reference_optimum(
    spec: &ObjectiveSpec,
    data: &Dataset,
    tolerance: f64,
    max_iterations: usize,
) -> Result<ReferenceOptimum> {
    if tolerance <= 0.0 {
        return Err(Error::InvalidSpec("tolerance must be positive".into()));
    }
    spec.check_labels(data)?;
    match &spec.family {
        ObjectiveFamily::Quadratic { .. } => {
            let dim = spec.param_dim(data)?;
            let mut mean = vec![0.0; dim];
            for i in 0..data.n() {
                for (m, &c) in mean.iter_mut().zip(data.feature(i)) {
                    *m += c;
                }
            }
            for m in &mut mean {
                *m /= data.n() as f64;
            }
            let w_star = ParamVector::new(mean);
            let f_star = full_objective(spec, data, &w_star)?.value;
            Ok(ReferenceOptimum { w_star, f_star })
        }
        ObjectiveFamily::LogisticL2 { lambda } => {
            let mut aux = RandomnessSource::from_seed(0x5eed_0f0f);
            let rho = logistic::smoothness_bound(data, *lambda, 200, &mut aux);
            let step = 1.0 / rho;
            let mut w = ParamVector::zeros(spec.param_dim(data)?);
            let mut iterations = 0;
            loop {
                let report = full_objective(spec, data, &w)?;
                let grad_norm = report.grad_norm_sq().sqrt();
                if grad_norm <= tolerance {
                    return Ok(ReferenceOptimum {
                        w_star: w,
                        f_star: report.value,
                    });
                }
                if iterations >= max_iterations {
                    return Err(Error::ToleranceNotReached {
                        achieved: grad_norm,
                        tolerance,
                        iterations,
                    });
                }
                for (wi, gi) in w.as_mut_slice().iter_mut().zip(&report.gradient) {
                    *wi -= step * gi;
                }
                iterations += 1;
            }
        }
        ObjectiveFamily::Mlp { .. } => Err(Error::NoCertifiedOptimum { family: "mlp" }),
    }
}
