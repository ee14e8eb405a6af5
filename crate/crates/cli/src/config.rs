//! Experiment configuration: JSON schema, validation, and construction of
//! the core objects an experiment needs.

use serde::{Deserialize, Serialize};
use shuffle_sgd::data::{
    gaussian_blobs, quadratic_centers, synthetic_logistic, synthetic_logistic_clusters,
    synthetic_logistic_separable, Dataset,
};
use shuffle_sgd::engine::Metric;
use shuffle_sgd::objectives::{Activation, ObjectiveSpec};
use shuffle_sgd::rng::derive_seed;
use shuffle_sgd::schedule::{Regime, StreamSpec};
use shuffle_sgd::shuffling::ShufflerSpec;
use std::path::PathBuf;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ObjectiveConfig {
    Quadratic {
        /// Condition number of the linearly spaced spectrum on [1, kappa].
        #[serde(default = "default_kappa")]
        condition_number: f64,
    },
    LogisticL2 {
        /// Defaults to 1/sqrt(n).
        lambda: Option<f64>,
    },
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
}

fn default_kappa() -> f64 {
    10.0
}
fn default_hidden() -> Vec<usize> {
    vec![16, 8]
}
fn default_classes() -> usize {
    3
}
fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    QuadraticCenters {
        n: usize,
        d: usize,
        seed: u64,
        #[serde(default = "default_offset")]
        offset: f64,
        #[serde(default)]
        sorted: bool,
    },
    SyntheticLogistic {
        n: usize,
        d: usize,
        seed: u64,
    },
    SyntheticLogisticSeparable {
        n: usize,
        d: usize,
        seed: u64,
        #[serde(default = "default_teacher_scale")]
        teacher_scale: f64,
        #[serde(default = "default_margin_gap")]
        margin_gap: f64,
    },
    SyntheticLogisticClusters {
        n: usize,
        d: usize,
        seed: u64,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    SyntheticGaussianBlobs {
        n: usize,
        d: usize,
        seed: u64,
        #[serde(default = "default_classes")]
        classes: usize,
        #[serde(default = "default_separation")]
        separation: f64,
    },
}

fn default_offset() -> f64 {
    2.0
}
fn default_teacher_scale() -> f64 {
    5.0
}
fn default_margin_gap() -> f64 {
    3.0
}
fn default_separation() -> f64 {
    3.0
}
fn default_spread() -> f64 {
    0.1
}

impl DatasetConfig {
    pub fn n(&self) -> usize {
        match self {
            DatasetConfig::QuadraticCenters { n, .. }
            | DatasetConfig::SyntheticLogistic { n, .. }
            | DatasetConfig::SyntheticLogisticSeparable { n, .. }
            | DatasetConfig::SyntheticLogisticClusters { n, .. }
            | DatasetConfig::SyntheticGaussianBlobs { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Result<Dataset, CliError> {
        let data = match *self {
            DatasetConfig::QuadraticCenters {
                n,
                d,
                seed,
                offset,
                sorted,
            } => quadratic_centers(n, d, offset, sorted, seed),
            DatasetConfig::SyntheticLogistic { n, d, seed } => synthetic_logistic(n, d, seed),
            DatasetConfig::SyntheticLogisticSeparable {
                n,
                d,
                seed,
                teacher_scale,
                margin_gap,
            } => synthetic_logistic_separable(n, d, teacher_scale, margin_gap, seed),
            DatasetConfig::SyntheticLogisticClusters {
                n,
                d,
                seed,
                separation,
                spread,
            } => synthetic_logistic_clusters(n, d, separation, spread, seed),
            DatasetConfig::SyntheticGaussianBlobs {
                n,
                d,
                seed,
                classes,
                separation,
            } => gaussian_blobs(n, d, classes, separation, seed),
        };
        data.map_err(CliError::from)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamConfig {
    pub regime: Regime,
    pub workers: usize,
    pub batch: usize,
    pub epochs: usize,
    #[serde(default = "default_shuffler")]
    pub shuffler: ShufflerSpec,
}

fn default_shuffler() -> ShufflerSpec {
    ShufflerSpec::fisher_yates()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleConfig {
    /// `2/(mu k)`; `mu` defaults to the objective's strong-convexity
    /// constant.
    StronglyConvexDecay { mu: Option<f64> },
    /// `sqrt(L/k)`; `lipschitz` defaults to the estimated Lipschitz bound.
    ConvexSqrtDecay { lipschitz: Option<f64> },
    /// Constant step from the smooth non-convex tuning rule. `rho` and the
    /// per-sample gradient bound default to estimated constants; the
    /// initial gap uses `F(w_0) - f_star_lower_bound`.
    NonConvexConstant {
        #[serde(default)]
        f_star_lower_bound: f64,
        rho: Option<f64>,
        per_sample_grad_sq: Option<f64>,
    },
    UserConstant { eta: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TargetConfig {
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsConfig {
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_sample_count() -> usize {
    20
}
fn default_radius() -> f64 {
    2.0
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            sample_count: default_sample_count(),
            radius: default_radius(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    500_000
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
        }
    }
}

/// Sweep axes; the cross product of all non-empty axes is run. Axes that
/// are absent reuse the base stream's value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub workers: Vec<usize>,
    #[serde(default)]
    pub epochs: Vec<usize>,
    #[serde(default)]
    pub regimes: Vec<Regime>,
    #[serde(default)]
    pub shuffler_rounds: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub objective: ObjectiveConfig,
    pub dataset: DatasetConfig,
    pub stream: StreamConfig,
    pub schedule: ScheduleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Semantic validation; every swept combination must satisfy the
    /// divisibility constraint before any run starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.dataset.n();
        let check = |workers: usize, batch: usize| -> Result<(), CliError> {
            if workers == 0 || batch == 0 {
                return Err(CliError::Config(
                    "stream.workers and stream.batch must be >= 1".into(),
                ));
            }
            if n % (workers * batch) != 0 {
                return Err(CliError::Config(format!(
                    "dataset.n = {n} is not divisible by workers*batch = {}",
                    workers * batch
                )));
            }
            Ok(())
        };
        check(self.stream.workers, self.stream.batch)?;
        if self.stream.epochs == 0 {
            return Err(CliError::Config("stream.epochs must be >= 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            for &workers in &sweep.workers {
                check(workers, self.stream.batch)?;
            }
            for &epochs in &sweep.epochs {
                if epochs == 0 {
                    return Err(CliError::Config("sweep.epochs entries must be >= 1".into()));
                }
            }
        }
        match (&self.objective, &self.dataset) {
            (ObjectiveConfig::Quadratic { .. }, DatasetConfig::QuadraticCenters { .. }) => {}
            (
                ObjectiveConfig::LogisticL2 { .. },
                DatasetConfig::SyntheticLogistic { .. }
                | DatasetConfig::SyntheticLogisticSeparable { .. }
                | DatasetConfig::SyntheticLogisticClusters { .. },
            ) => {}
            (ObjectiveConfig::Mlp { .. }, DatasetConfig::SyntheticGaussianBlobs { .. }) => {}
            _ => {
                return Err(CliError::Config(
                    "objective.family does not match dataset.kind".into(),
                ))
            }
        }
        if let (
            ObjectiveConfig::Mlp { classes, .. },
            DatasetConfig::SyntheticGaussianBlobs {
                classes: data_classes,
                ..
            },
        ) = (&self.objective, &self.dataset)
        {
            if classes != data_classes {
                return Err(CliError::Config(format!(
                    "objective.classes = {classes} but dataset.classes = {data_classes}"
                )));
            }
        }
        if let ScheduleConfig::UserConstant { eta } = self.schedule {
            if eta <= 0.0 {
                return Err(CliError::Config("schedule.eta must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn build_objective(&self, data: &Dataset) -> Result<ObjectiveSpec, CliError> {
        let spec = match &self.objective {
            ObjectiveConfig::Quadratic { condition_number } => {
                ObjectiveSpec::quadratic_with_condition(data.d_in(), *condition_number)?
            }
            ObjectiveConfig::LogisticL2 { lambda } => {
                let lambda = lambda.unwrap_or(1.0 / (data.n() as f64).sqrt());
                ObjectiveSpec::logistic_l2(lambda)?
            }
            ObjectiveConfig::Mlp {
                hidden,
                classes,
                activation,
            } => ObjectiveSpec::mlp(data.d_in(), hidden.clone(), *classes, *activation)?,
        };
        Ok(spec)
    }

    /// The stream spec of one cell. The stream seed is derived from the
    /// master seed and the non-regime cell coordinates, so regimes compared
    /// at the same cell share their randomness.
    pub fn stream_spec(
        &self,
        regime: Regime,
        workers: usize,
        epochs: usize,
        rounds: u32,
    ) -> StreamSpec {
        let mut shuffler = self.stream.shuffler;
        shuffler.rounds = rounds;
        let key = format!("m{workers}_s{epochs}_h{rounds}_b{}", self.stream.batch);
        StreamSpec {
            regime,
            n: self.dataset.n(),
            workers,
            batch: self.stream.batch,
            epochs,
            shuffler,
            seed: derive_seed(self.seed, 1, shuffle_sgd::rng::stable_hash(key.as_bytes())),
        }
    }

    pub fn base_stream_spec(&self) -> StreamSpec {
        self.stream_spec(
            self.stream.regime,
            self.stream.workers,
            self.stream.epochs,
            self.stream.shuffler.rounds,
        )
    }
}
