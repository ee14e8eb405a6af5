//! `shuffle-sgd`: deterministic distributed-SGD shuffling experiments.
//!
//! Subcommands: `run` (one experiment), `sweep` (cross product of axes),
//! `verify` (the offline verification battery), `tv` (shuffling error).
//! Exit codes: 0 ok, 1 verification failure, 2 config error, 3 numeric
//! abort, 4 enumeration budget exceeded.

mod config;
mod output;
mod runner;
mod svg;

use clap::{Parser, Subcommand, ValueEnum};
use config::ExperimentConfig;
use shuffle_sgd::analysis::{tv_empirical, tv_exact};
use shuffle_sgd::error::Error as CoreError;
use shuffle_sgd::rng::RandomnessSource;
use shuffle_sgd::shuffling::{ShuffleAlgorithm, ShufflerSpec};
use shuffle_sgd::verify::{run_battery, BatteryConfig};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
    Io(std::io::Error),
    VerifyFailed(usize),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Core(err) => write!(f, "{err}"),
            CliError::Io(err) => write!(f, "io error: {err}"),
            CliError::VerifyFailed(count) => write!(f, "{count} verification check(s) failed"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(CoreError::InvalidSpec(_)) => 2,
            CliError::Core(CoreError::NonFinite { .. }) => 3,
            CliError::Core(CoreError::BudgetExceeded { .. }) => 4,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "shuffle-sgd", version, about = "Distributed SGD under shuffling regimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TvMode {
    Exact,
    Empirical,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one training run from a JSON config.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the cross product of the config's sweep axes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the offline verification battery.
    Verify {
        /// Override the battery seed (verdicts are seed-robust).
        #[arg(long)]
        seed: Option<u64>,
        /// Also write one JSON record per check to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Shuffling error of an algorithm: TV distance to uniform.
    Tv {
        /// Algorithm: fisher-yates, riffle, top-to-random, identity.
        #[arg(long, value_parser = parse_algorithm)]
        alg: ShuffleAlgorithm,
        /// Rounds, a single value or an inclusive range like 1..8.
        #[arg(long, default_value = "0")]
        h: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = TvMode::Exact)]
        mode: TvMode,
        /// Sample count for empirical mode.
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long, default_value_t = 0x5eed_ba77)]
        seed: u64,
        /// Write the mixing curve (rounds, epsilon) to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_algorithm(text: &str) -> Result<ShuffleAlgorithm, String> {
    match text {
        "fisher-yates" => Ok(ShuffleAlgorithm::FisherYates),
        "riffle" => Ok(ShuffleAlgorithm::Riffle),
        "top-to-random" => Ok(ShuffleAlgorithm::TopToRandom),
        "identity" => Ok(ShuffleAlgorithm::Identity),
        other => Err(format!(
            "unknown algorithm {other}; expected fisher-yates, riffle, top-to-random, or identity"
        )),
    }
}

fn parse_rounds(text: &str) -> Result<Vec<u32>, CliError> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u32 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad rounds range start: {lo}")))?;
        let hi: u32 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad rounds range end: {hi}")))?;
        if hi < lo {
            return Err(CliError::Config("rounds range is empty".into()));
        }
        Ok((lo..=hi).collect())
    } else {
        let single: u32 = text
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad rounds value: {text}")))?;
        Ok(vec![single])
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn cmd_verify(seed: Option<u64>, json: Option<PathBuf>) -> Result<(), CliError> {
    let mut battery = BatteryConfig::default();
    if let Some(seed) = seed {
        battery.seed = seed;
    }
    let reports = run_battery(&battery)?;
    let mut failures = 0;
    let mut records = String::new();
    for report in &reports {
        println!("{report}");
        records.push_str(&report.to_json());
        records.push('\n');
        if !report.pass {
            eprintln!("  failing report: {}", report.to_json());
            failures += 1;
        }
    }
    if let Some(path) = json {
        output::write_atomic(&path, records.as_bytes())?;
    }
    if failures > 0 {
        return Err(CliError::VerifyFailed(failures));
    }
    println!("all {} checks passed", reports.len());
    Ok(())
}

fn cmd_tv(
    alg: ShuffleAlgorithm,
    rounds: &[u32],
    n: usize,
    mode: TvMode,
    trials: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut curve = Vec::new();
    for &h in rounds {
        let spec = ShufflerSpec {
            algorithm: alg,
            rounds: h,
        };
        let report = match mode {
            TvMode::Exact => tv_exact(&spec, n)?,
            TvMode::Empirical => {
                let mut rng = RandomnessSource::from_seed(seed.wrapping_add(u64::from(h)));
                tv_empirical(&spec, n, trials, &mut rng)?
            }
        };
        println!(
            "eps({}, n={n}) = {:.6} [{}]",
            spec.label(),
            report.epsilon,
            match mode {
                TvMode::Exact => "exact".to_string(),
                TvMode::Empirical => format!("empirical, {trials} trials"),
            }
        );
        curve.push((f64::from(h), report.epsilon));
    }
    if let Some(path) = out {
        output::write_atomic(
            &path,
            output::plot_data("rounds", "epsilon", &[("mixing".into(), curve)]).as_bytes(),
        )?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            runner::execute_run(&load_config(&config)?)?;
            Ok(())
        }
        Command::Sweep { config } => {
            runner::execute_sweep(&load_config(&config)?)?;
            Ok(())
        }
        Command::Verify { seed, json } => cmd_verify(seed, json),
        Command::Tv {
            alg,
            h,
            n,
            mode,
            trials,
            seed,
            out,
        } => cmd_tv(alg, &parse_rounds(&h)?, n, mode, trials, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
