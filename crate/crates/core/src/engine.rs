//! Synchronous distributed SGD over a batch stream.
//!
//! One iteration: every worker computes the gradient sum over its batch,
//! the sums are reduced in fixed worker order (for bitwise reproducibility),
//! and the master applies
//!
//! ```text
//! w_{t+1} = w_t - η · (1/(M·b)) · Σ_m Σ_{i ∈ D_m(t)} ∇f_i(w_t)
//! ```
//!
//! Metrics are exact: the full-dataset objective and gradient are evaluated
//! every iteration, which desk-scale n makes affordable and which removes
//! estimation noise from rate measurements.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objectives::{
    full_objective, loss_and_grad_batch, ObjectiveSpec, ParamVector, ReferenceOptimum,
};
use crate::schedule::BatchStream;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Learning-rate schedules. `s` and `t` are 1-based; the global iteration
/// count is `(s-1)·T + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LrSchedule {
    /// `η = 2 / (μ ((s-1)T + t))` for strongly convex objectives.
    StronglyConvexDecay { mu: f64 },
    /// `η = sqrt(L / ((s-1)T + t))` for convex Lipschitz objectives.
    ConvexSqrtDecay { lipschitz: f64 },
    /// Constant step for smooth non-convex objectives:
    /// `η = min( sqrt(2ΔF / ((3ρB²/(bM))(1 + 584·ln T / T))) / sqrt(ST), 1/(6ρ) )`
    /// where ΔF is the initial suboptimality `F(w_0) - F*`.
    NonConvexConstant {
        rho: f64,
        /// B²: per-sample squared-gradient bound.
        per_sample_grad_sq: f64,
        batch: usize,
        workers: usize,
        epochs: usize,
        /// ΔF; for objectives without a certified F*, a configured lower
        /// bound of F* is substituted when forming it.
        initial_gap: f64,
    },
    /// Explicit constant step.
    UserConstant { eta: f64 },
}

impl LrSchedule {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            LrSchedule::StronglyConvexDecay { mu } => *mu > 0.0,
            LrSchedule::ConvexSqrtDecay { lipschitz } => *lipschitz > 0.0,
            LrSchedule::NonConvexConstant {
                rho,
                per_sample_grad_sq,
                batch,
                workers,
                epochs,
                initial_gap,
            } => {
                *rho > 0.0
                    && *per_sample_grad_sq > 0.0
                    && *batch > 0
                    && *workers > 0
                    && *epochs > 0
                    && *initial_gap > 0.0
            }
            LrSchedule::UserConstant { eta } => *eta > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(
                "schedule parameters must be strictly positive".into(),
            ))
        }
    }
}

/// The step size at epoch `s`, iteration `t` (both 1-based), with `T`
/// iterations per epoch.
pub fn lr_at(schedule: &LrSchedule, s: usize, t: usize, iters_per_epoch: usize) -> Result<f64> {
    if s < 1 || t < 1 || t > iters_per_epoch {
        return Err(Error::InvalidSpec(format!(
            "invalid (s, t) = ({s}, {t}) for T = {iters_per_epoch}"
        )));
    }
    schedule.validate()?;
    let k = ((s - 1) * iters_per_epoch + t) as f64;
    Ok(match schedule {
        LrSchedule::StronglyConvexDecay { mu } => 2.0 / (mu * k),
        LrSchedule::ConvexSqrtDecay { lipschitz } => (lipschitz / k).sqrt(),
        LrSchedule::NonConvexConstant {
            rho,
            per_sample_grad_sq,
            batch,
            workers,
            epochs,
            initial_gap,
        } => {
            let t_per_epoch = iters_per_epoch as f64;
            let total = (*epochs * iters_per_epoch) as f64;
            let chunk = (*batch * *workers) as f64;
            let noise = 3.0 * rho * per_sample_grad_sq / chunk
                * (1.0 + 584.0 * t_per_epoch.ln() / t_per_epoch);
            let tuned = (2.0 * initial_gap / noise).sqrt() / total.sqrt();
            tuned.min(1.0 / (6.0 * rho))
        }
        LrSchedule::UserConstant { eta } => *eta,
    })
}

/// Mutable training state: current iterate, running iterate sum for the
/// averaged iterate, and position counters.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub w: ParamVector,
    iterate_sum: Vec<f64>,
    count: usize,
    pub epoch: usize,
    pub iter: usize,
}

impl TrainState {
    pub fn new(w0: ParamVector) -> Self {
        let dim = w0.dim();
        Self {
            w: w0,
            iterate_sum: vec![0.0; dim],
            count: 0,
            epoch: 1,
            iter: 0,
        }
    }

    pub fn iterations_elapsed(&self) -> usize {
        self.count
    }

    /// The averaged iterate `(1/count) Σ w_k` over all post-update iterates
    /// seen so far; `None` before the first step.
    pub fn averaged_iterate(&self) -> Option<ParamVector> {
        if self.count == 0 {
            return None;
        }
        let inv = 1.0 / self.count as f64;
        Some(ParamVector::new(
            self.iterate_sum.iter().map(|v| v * inv).collect(),
        ))
    }
}

/// One synchronous update. Per-worker gradient sums are computed
/// independently, reduced in worker order 0..M, averaged by `1/(M·b)`, and
/// applied; the new iterate joins the running average and the iteration
/// counter advances.
pub fn step(
    state: &mut TrainState,
    batches: &[Vec<usize>],
    spec: &ObjectiveSpec,
    data: &Dataset,
    eta: f64,
) -> Result<()> {
    if batches.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let batch_size = batches[0].len();
    for (m, batch) in batches.iter().enumerate() {
        if batch.len() != batch_size {
            return Err(Error::BatchSizeMismatch {
                worker: m,
                expected: batch_size,
                got: batch.len(),
            });
        }
    }
    if eta <= 0.0 || !eta.is_finite() {
        return Err(Error::InvalidSpec("step size must be positive".into()));
    }

    let dim = state.w.dim();
    let mut total = vec![0.0; dim];
    for (m, batch) in batches.iter().enumerate() {
        let report = loss_and_grad_batch(spec, data, &state.w, batch)?;
        if !report.is_finite() {
            return Err(Error::NonFinite {
                what: "worker gradient",
                epoch: state.epoch,
                iter: state.iter + 1,
                worker: m + 1,
            });
        }
        for (acc, g) in total.iter_mut().zip(&report.gradient) {
            *acc += g;
        }
    }
    let scale = eta / (batches.len() * batch_size) as f64;
    for (w, g) in state.w.as_mut_slice().iter_mut().zip(&total) {
        *w -= scale * g;
    }
    for (acc, w) in state.iterate_sum.iter_mut().zip(state.w.as_slice()) {
        *acc += w;
    }
    state.count += 1;
    state.iter += 1;
    Ok(())
}

/// Per-iteration measurements, taken at the post-update iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Epoch s, 1-based.
    pub epoch: usize,
    /// Iteration t within the epoch, 1-based.
    pub iter: usize,
    /// `((s-1)T + t) · bM / n`: cumulative processed instances over n.
    pub effective_passes: f64,
    /// `F(w) - F*` when a reference optimum is known.
    pub f_gap: Option<f64>,
    /// `‖w - w*‖²` when a reference optimum is known.
    pub dist_sq: Option<f64>,
    /// `‖∇F(w)‖²`.
    pub grad_norm_sq: f64,
    /// Step size used by this iteration.
    pub lr: f64,
}

/// Metrics of the averaged iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragedIterateMetrics {
    pub value: f64,
    pub f_gap: Option<f64>,
    pub dist_sq: Option<f64>,
    pub grad_norm_sq: f64,
}

/// Complete per-iteration record of one run.
#[derive(Debug, Clone)]
pub struct MetricsTrace {
    pub records: Vec<IterationRecord>,
    pub averaged: AveragedIterateMetrics,
    pub final_w: ParamVector,
    pub averaged_w: ParamVector,
}

/// Which column of a trace a target or slope refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    FGap,
    DistSq,
    GradNormSq,
    /// Running mean of `‖∇F‖²` over iterations so far — the quantity the
    /// non-convex guarantees bound.
    GradNormSqRunningMean,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::FGap => "f_gap",
            Metric::DistSq => "dist_sq",
            Metric::GradNormSq => "grad_norm_sq",
            Metric::GradNormSqRunningMean => "grad_norm_sq_running_mean",
        }
    }
}

impl MetricsTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a run has at least one record")
    }

    /// `(effective_passes, value)` series for a metric; records without the
    /// requested value (no reference optimum) are skipped.
    pub fn series(&self, metric: Metric) -> Vec<(f64, f64)> {
        match metric {
            Metric::FGap => self
                .records
                .iter()
                .filter_map(|r| r.f_gap.map(|v| (r.effective_passes, v)))
                .collect(),
            Metric::DistSq => self
                .records
                .iter()
                .filter_map(|r| r.dist_sq.map(|v| (r.effective_passes, v)))
                .collect(),
            Metric::GradNormSq => self
                .records
                .iter()
                .map(|r| (r.effective_passes, r.grad_norm_sq))
                .collect(),
            Metric::GradNormSqRunningMean => {
                let mut sum = 0.0;
                self.records
                    .iter()
                    .enumerate()
                    .map(|(k, r)| {
                        sum += r.grad_norm_sq;
                        (r.effective_passes, sum / (k + 1) as f64)
                    })
                    .collect()
            }
        }
    }

    /// CSV with header `epoch,iter,effective_passes,f_gap,dist_sq,grad_norm_sq,lr`;
    /// f_gap and dist_sq are empty when no reference optimum was supplied.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "epoch,iter,effective_passes,f_gap,dist_sq,grad_norm_sq,lr")?;
        for r in &self.records {
            let f_gap = r.f_gap.map(|v| v.to_string()).unwrap_or_default();
            let dist = r.dist_sq.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch, r.iter, r.effective_passes, f_gap, dist, r.grad_norm_sq, r.lr
            )?;
        }
        Ok(())
    }
}

/// Execute `S` epochs × `T` iterations of the synchronous update over the
/// stream, recording exact metrics each iteration. The trace is a pure
/// function of `(stream spec, objective spec, schedule, w0)`.
pub fn run(
    stream: &BatchStream,
    spec: &ObjectiveSpec,
    data: &Dataset,
    schedule: &LrSchedule,
    w0: ParamVector,
    reference: Option<&ReferenceOptimum>,
) -> Result<MetricsTrace> {
    schedule.validate()?;
    let dim = spec.param_dim(data)?;
    if w0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w0.dim(),
        });
    }
    if stream.spec().n != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: stream.spec().n,
        });
    }
    if let Some(opt) = reference {
        if opt.w_star.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: opt.w_star.dim(),
            });
        }
    }

    let epochs = stream.epochs();
    let iters = stream.iters_per_epoch();
    let chunk = stream.workers() * stream.spec().batch;
    let n = data.n() as f64;

    let mut state = TrainState::new(w0);
    let mut records = Vec::with_capacity(epochs * iters);
    for s in 1..=epochs {
        // Epoch-boundary continuity: the first iterate of epoch s+1 is the
        // last iterate of epoch s; only the counters roll over.
        state.epoch = s;
        state.iter = 0;
        for t in 1..=iters {
            let eta = lr_at(schedule, s, t, iters)?;
            step(&mut state, stream.batches_at(s - 1, t - 1), spec, data, eta)?;
            let report = full_objective(spec, data, &state.w)?;
            if !report.is_finite() || !state.w.is_finite() {
                return Err(Error::NonFinite {
                    what: "objective",
                    epoch: s,
                    iter: t,
                    worker: 0,
                });
            }
            records.push(IterationRecord {
                epoch: s,
                iter: t,
                effective_passes: ((s - 1) * iters + t) as f64 * chunk as f64 / n,
                f_gap: reference.map(|opt| report.value - opt.f_star),
                dist_sq: reference.map(|opt| state.w.dist_sq(&opt.w_star)),
                grad_norm_sq: report.grad_norm_sq(),
                lr: eta,
            });
        }
    }

    let averaged_w = state
        .averaged_iterate()
        .expect("at least one iteration ran");
    let avg_report = full_objective(spec, data, &averaged_w)?;
    let averaged = AveragedIterateMetrics {
        value: avg_report.value,
        f_gap: reference.map(|opt| avg_report.value - opt.f_star),
        dist_sq: reference.map(|opt| averaged_w.dist_sq(&opt.w_star)),
        grad_norm_sq: avg_report.grad_norm_sq(),
    };
    Ok(MetricsTrace {
        records,
        averaged,
        final_w: state.w.clone(),
        averaged_w,
    })
}
