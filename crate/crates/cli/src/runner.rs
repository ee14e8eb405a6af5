//! Drives experiments: prepares the objective/dataset/reference, executes
//! runs and sweep cells, and emits every output file.

use crate::config::{ExperimentConfig, ScheduleConfig, SweepConfig};
use crate::output::{plot_data, write_atomic};
use crate::svg::{line_chart, Series};
use crate::CliError;
use serde_json::json;
use shuffle_sgd::analysis::{epochs_to_target, speedup};
use shuffle_sgd::data::Dataset;
use shuffle_sgd::engine::{lr_at, run, LrSchedule, Metric, MetricsTrace};
use shuffle_sgd::error::Error as CoreError;
use shuffle_sgd::objectives::{
    estimate_constants, full_objective, solve_reference_optimum, ObjectiveFamily, ObjectiveSpec,
    ParamVector, ReferenceOptimum,
};
use shuffle_sgd::rng::{derive_seed, RandomnessSource};
use shuffle_sgd::schedule::{build_stream, Regime, StreamSpec};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Everything a run needs that does not depend on the stream cell.
pub struct PreparedExperiment {
    pub data: Dataset,
    pub objective: ObjectiveSpec,
    pub reference: Option<ReferenceOptimum>,
    pub w0: ParamVector,
}

fn schedule_needs_estimates(config: &ExperimentConfig, objective: &ObjectiveSpec) -> bool {
    match &config.schedule {
        ScheduleConfig::StronglyConvexDecay { mu } => {
            mu.is_none() && objective.constants.strong_convexity.is_none()
        }
        ScheduleConfig::ConvexSqrtDecay { lipschitz } => {
            lipschitz.is_none() && objective.constants.lipschitz.is_none()
        }
        ScheduleConfig::NonConvexConstant {
            rho,
            per_sample_grad_sq,
            ..
        } => {
            (rho.is_none() && objective.constants.smoothness.is_none())
                || (per_sample_grad_sq.is_none()
                    && objective.constants.per_sample_grad_sq.is_none())
        }
        ScheduleConfig::UserConstant { .. } => false,
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedExperiment, CliError> {
    let data = config.dataset.build()?;
    let mut objective = config.build_objective(&data)?;
    if schedule_needs_estimates(config, &objective) {
        let mut rng = RandomnessSource::from_seed(derive_seed(config.seed, 3, 0));
        objective = estimate_constants(
            &objective,
            &data,
            config.constants.sample_count,
            config.constants.radius,
            &mut rng,
        )?;
    }

    let reference = match (&objective.family, &config.reference) {
        (ObjectiveFamily::Mlp { .. }, _) => None,
        (_, maybe) => {
            let settings = maybe.clone().unwrap_or_default();
            Some(solve_reference_optimum(
                &objective,
                &data,
                settings.tolerance,
                settings.max_iterations,
            )?)
        }
    };
    let w0 = objective.initial_point(&data, derive_seed(config.seed, 2, 0))?;
    Ok(PreparedExperiment {
        data,
        objective,
        reference,
        w0,
    })
}

/// Concrete learning-rate schedule for one stream cell; decay schedules are
/// cell-independent, the non-convex constant rule reads the cell shape.
pub fn build_schedule(
    config: &ExperimentConfig,
    prepared: &PreparedExperiment,
    stream: &StreamSpec,
) -> Result<LrSchedule, CliError> {
    let constants = &prepared.objective.constants;
    let schedule = match &config.schedule {
        ScheduleConfig::StronglyConvexDecay { mu } => {
            let mu = mu.or(constants.strong_convexity).ok_or_else(|| {
                CliError::Config(
                    "strongly-convex-decay needs mu: none configured and the \
                     objective has no strong-convexity constant"
                        .into(),
                )
            })?;
            LrSchedule::StronglyConvexDecay { mu }
        }
        ScheduleConfig::ConvexSqrtDecay { lipschitz } => {
            let lipschitz = lipschitz.or(constants.lipschitz).ok_or_else(|| {
                CliError::Config("convex-sqrt-decay needs a Lipschitz bound".into())
            })?;
            LrSchedule::ConvexSqrtDecay { lipschitz }
        }
        ScheduleConfig::NonConvexConstant {
            f_star_lower_bound,
            rho,
            per_sample_grad_sq,
        } => {
            let rho = rho.or(constants.smoothness).ok_or_else(|| {
                CliError::Config("non-convex-constant needs a smoothness estimate".into())
            })?;
            let grad_sq = per_sample_grad_sq
                .or(constants.per_sample_grad_sq)
                .ok_or_else(|| {
                    CliError::Config(
                        "non-convex-constant needs a per-sample gradient bound".into(),
                    )
                })?;
            let f0 = full_objective(&prepared.objective, &prepared.data, &prepared.w0)?.value;
            LrSchedule::NonConvexConstant {
                rho,
                per_sample_grad_sq: grad_sq,
                batch: stream.batch,
                workers: stream.workers,
                epochs: stream.epochs,
                initial_gap: f0 - f_star_lower_bound,
            }
        }
        ScheduleConfig::UserConstant { eta } => LrSchedule::UserConstant { eta: *eta },
    };
    Ok(schedule)
}

pub fn run_cell(
    config: &ExperimentConfig,
    prepared: &PreparedExperiment,
    stream_spec: &StreamSpec,
) -> Result<MetricsTrace, CliError> {
    let stream = build_stream(stream_spec)?;
    let schedule = build_schedule(config, prepared, stream_spec)?;
    let trace = run(
        &stream,
        &prepared.objective,
        &prepared.data,
        &schedule,
        prepared.w0.clone(),
        prepared.reference.as_ref(),
    )?;
    Ok(trace)
}

fn plot_metric(config: &ExperimentConfig, prepared: &PreparedExperiment) -> Metric {
    config
        .target
        .map(|t| t.metric)
        .unwrap_or(if prepared.reference.is_some() {
            Metric::FGap
        } else {
            Metric::GradNormSq
        })
}

fn output_root(config: &ExperimentConfig) -> PathBuf {
    match std::env::var_os("SHUFFLE_SGD_OUT") {
        Some(root) => PathBuf::from(root),
        None => config.output_dir.clone(),
    }
}

fn summary_json(
    config: &ExperimentConfig,
    prepared: &PreparedExperiment,
    stream_spec: &StreamSpec,
    trace: &MetricsTrace,
) -> Result<String, CliError> {
    let schedule = build_schedule(config, prepared, stream_spec)?;
    let iters = stream_spec.iters_per_epoch();
    let target_info = config.target.map(|t| {
        json!({
            "metric": t.metric.name(),
            "value": t.value,
            "epochs_to_target": epochs_to_target(trace, t.metric, t.value),
        })
    });
    let value = json!({
        "n": stream_spec.n,
        "workers": stream_spec.workers,
        "batch": stream_spec.batch,
        "epochs": stream_spec.epochs,
        "iters_per_epoch": iters,
        "regime": stream_spec.regime.name(),
        "shuffler": stream_spec.shuffler.label(),
        "stream_seed": stream_spec.seed,
        "objective": prepared.objective.family.name(),
        "constants": prepared.objective.constants,
        "f_star": prepared.reference.as_ref().map(|r| r.f_star),
        "initial_lr": lr_at(&schedule, 1, 1, iters)?,
        "final": trace.last(),
        "averaged_iterate": trace.averaged,
        "target": target_info,
    });
    Ok(serde_json::to_string_pretty(&value).expect("summary serializes"))
}

fn write_cell_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    prepared: &PreparedExperiment,
    stream_spec: &StreamSpec,
    trace: &MetricsTrace,
) -> Result<(), CliError> {
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    write_atomic(&dir.join("trace.csv"), &csv)?;

    write_atomic(
        &dir.join("summary.json"),
        summary_json(config, prepared, stream_spec, trace)?.as_bytes(),
    )?;

    let metric = plot_metric(config, prepared);
    let series = trace.series(metric);
    let label = format!("{} {}", stream_spec.regime.name(), stream_spec.shuffler.label());
    write_atomic(
        &dir.join("plot.dat"),
        plot_data(
            "effective_passes",
            metric.name(),
            &[(label.clone(), series.clone())],
        )
        .as_bytes(),
    )?;
    let svg = line_chart(
        &format!("{} vs effective passes", metric.name()),
        "effective passes",
        metric.name(),
        &[Series {
            label,
            points: &series,
        }],
    );
    write_atomic(&dir.join("plot.svg"), svg.as_bytes())?;
    Ok(())
}

/// `run` subcommand: one experiment, four files.
pub fn execute_run(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let prepared = prepare(config)?;
    let stream_spec = config.base_stream_spec();
    let trace = run_cell(config, &prepared, &stream_spec)?;
    let dir = output_root(config);
    write_atomic(&dir.join("config.json"), config.to_json().as_bytes())?;
    write_cell_outputs(&dir, config, &prepared, &stream_spec, &trace)?;
    println!(
        "run complete: {} epochs x {} iterations -> {}",
        stream_spec.epochs,
        stream_spec.iters_per_epoch(),
        dir.display()
    );
    Ok(dir)
}

struct Cell {
    key: String,
    regime: Regime,
    workers: usize,
    epochs: usize,
    rounds: u32,
}

fn sweep_cells(config: &ExperimentConfig, sweep: &SweepConfig) -> Vec<Cell> {
    let workers = if sweep.workers.is_empty() {
        vec![config.stream.workers]
    } else {
        sweep.workers.clone()
    };
    let epochs = if sweep.epochs.is_empty() {
        vec![config.stream.epochs]
    } else {
        sweep.epochs.clone()
    };
    let regimes = if sweep.regimes.is_empty() {
        vec![config.stream.regime]
    } else {
        sweep.regimes.clone()
    };
    let rounds = if sweep.shuffler_rounds.is_empty() {
        vec![config.stream.shuffler.rounds]
    } else {
        sweep.shuffler_rounds.clone()
    };
    let mut cells = Vec::new();
    for &m in &workers {
        for &s in &epochs {
            for &regime in &regimes {
                for &h in &rounds {
                    cells.push(Cell {
                        key: format!("{}_m{m}_s{s}_h{h}", regime.name()),
                        regime,
                        workers: m,
                        epochs: s,
                        rounds: h,
                    });
                }
            }
        }
    }
    cells
}

/// `sweep` subcommand: cross product of the axes; per-cell outputs plus
/// speedup and regime-comparison tables. Cell failures are recorded and do
/// not stop the sweep.
pub fn execute_sweep(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep requires a `sweep` section".into()))?;
    let prepared = prepare(config)?;
    let root = output_root(config);
    let cells = sweep_cells(config, &sweep);

    let mut traces: BTreeMap<String, MetricsTrace> = BTreeMap::new();
    let mut statuses = Vec::new();
    for cell in &cells {
        let stream_spec =
            config.stream_spec(cell.regime, cell.workers, cell.epochs, cell.rounds);
        let result = run_cell(config, &prepared, &stream_spec).and_then(|trace| {
            write_cell_outputs(
                &root.join("cells").join(&cell.key),
                config,
                &prepared,
                &stream_spec,
                &trace,
            )?;
            Ok(trace)
        });
        match result {
            Ok(trace) => {
                traces.insert(cell.key.clone(), trace);
                statuses.push(json!({ "cell": cell.key, "status": "ok" }));
            }
            Err(err) => {
                eprintln!("cell {} failed: {err}", cell.key);
                statuses.push(json!({ "cell": cell.key, "status": "error", "error": err.to_string() }));
            }
        }
    }

    let mut tables = String::new();
    let mut table_records = Vec::new();

    // Speedup per (regime, epochs, rounds) group over the workers axis.
    if let Some(target) = config.target {
        let metric = target.metric;
        let worker_axis = if sweep.workers.is_empty() {
            vec![config.stream.workers]
        } else {
            sweep.workers.clone()
        };
        if worker_axis.len() > 1 {
            for cell in &cells {
                if cell.workers != worker_axis[0] {
                    continue; // one table per group; iterate groups via first-worker cells
                }
                let group: BTreeMap<usize, MetricsTrace> = worker_axis
                    .iter()
                    .filter_map(|&m| {
                        let key = format!(
                            "{}_m{m}_s{}_h{}",
                            cell.regime.name(),
                            cell.epochs,
                            cell.rounds
                        );
                        traces.get(&key).map(|t| (m, t.clone()))
                    })
                    .collect();
                if !group.contains_key(&1) {
                    continue;
                }
                let rows = speedup(&group, target.value, metric)?;
                tables.push_str(&format!(
                    "# speedup: regime={} epochs={} rounds={} target {} <= {}\n",
                    cell.regime.name(),
                    cell.epochs,
                    cell.rounds,
                    metric.name(),
                    target.value
                ));
                tables.push_str("workers\tepochs_to_target\talpha\tspeedup\n");
                for row in &rows {
                    tables.push_str(&format!(
                        "{}\t{}\t{}\t{}\n",
                        row.workers,
                        row.epochs_to_target
                            .map_or("not-reached".into(), |v| format!("{v:.4}")),
                        row.alpha.map_or("-".into(), |v| format!("{v:.4}")),
                        row.speedup.map_or("-".into(), |v| format!("{v:.4}")),
                    ));
                }
                tables.push('\n');
                table_records.push(json!({
                    "table": "speedup",
                    "regime": cell.regime.name(),
                    "epochs": cell.epochs,
                    "rounds": cell.rounds,
                    "rows": rows,
                }));
            }
        }

        // Regime comparison per (workers, epochs, rounds).
        if sweep.regimes.len() > 1 {
            for cell in &cells {
                if cell.regime != sweep.regimes[0] {
                    continue;
                }
                let mut lines = Vec::new();
                let mut series = Vec::new();
                for &regime in &sweep.regimes {
                    let key = format!(
                        "{}_m{}_s{}_h{}",
                        regime.name(),
                        cell.workers,
                        cell.epochs,
                        cell.rounds
                    );
                    if let Some(trace) = traces.get(&key) {
                        let reached = epochs_to_target(trace, metric, target.value);
                        lines.push(json!({
                            "regime": regime.name(),
                            "epochs_to_target": reached,
                        }));
                        series.push((regime.name().to_string(), trace.series(metric)));
                    }
                }
                tables.push_str(&format!(
                    "# regime comparison: workers={} epochs={} rounds={} target {} <= {}\n",
                    cell.workers,
                    cell.epochs,
                    cell.rounds,
                    metric.name(),
                    target.value
                ));
                tables.push_str("regime\tepochs_to_target\n");
                for line in &lines {
                    tables.push_str(&format!(
                        "{}\t{}\n",
                        line["regime"].as_str().unwrap(),
                        line["epochs_to_target"]
                            .as_f64()
                            .map_or("not-reached".into(), |v| format!("{v:.4}")),
                    ));
                }
                tables.push('\n');
                table_records.push(json!({
                    "table": "regime-comparison",
                    "workers": cell.workers,
                    "epochs": cell.epochs,
                    "rounds": cell.rounds,
                    "rows": lines,
                }));

                let name = format!("compare_m{}_s{}_h{}", cell.workers, cell.epochs, cell.rounds);
                write_atomic(
                    &root.join(format!("{name}.dat")),
                    plot_data("effective_passes", metric.name(), &series).as_bytes(),
                )?;
                let svg_series: Vec<Series> = series
                    .iter()
                    .map(|(label, points)| Series {
                        label: label.clone(),
                        points,
                    })
                    .collect();
                write_atomic(
                    &root.join(format!("{name}.svg")),
                    line_chart(
                        &format!("{} by regime", metric.name()),
                        "effective passes",
                        metric.name(),
                        &svg_series,
                    )
                    .as_bytes(),
                )?;
            }
        }
    }

    if !tables.is_empty() {
        write_atomic(&root.join("tables.txt"), tables.as_bytes())?;
        print!("{tables}");
    }
    let summary = json!({ "cells": statuses, "tables": table_records });
    write_atomic(
        &root.join("sweep-summary.json"),
        serde_json::to_string_pretty(&summary)
            .expect("summary serializes")
            .as_bytes(),
    )?;
    println!("sweep complete: {} cells -> {}", cells.len(), root.display());
    Ok(root)
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        CliError::Core(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err)
    }
}
