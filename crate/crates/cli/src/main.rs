mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use vector_release::optimizer::Mode;
use vector_release::Execution;

use crate::scenario::{ModelTag, Scenario};

/// Impulsive sterile-male and Wolbachia release strategies against a
/// dengue outbreak.
#[derive(Debug, Parser)]
#[command(name = "vrelease", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one release schedule and report its infection burden.
    Simulate(SimulateArgs),
    /// Optimize release times (and sizes) by multistart gradient descent.
    Optimize(OptimizeArgs),
    /// Reproduction numbers, invasion threshold and equilibria.
    Analyze(AnalyzeArgs),
    /// Compare variational gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Replay or re-optimize the published schedules.
    Reproduce(ReproduceArgs),
    /// Turn trajectory CSVs into gnuplot scripts.
    Plots(PlotsArgs),
}

/// Options shared by every scenario-driven subcommand. Flags override the
/// values read from `--scenario`.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// TOML scenario file.
    #[arg(long, short = 's')]
    pub scenario: Option<PathBuf>,
    /// sit, wb or seir.
    #[arg(long, short = 'm')]
    pub model: Option<ModelTag>,
    /// Final time in days.
    #[arg(long = "horizon", short = 'T')]
    pub horizon: Option<f64>,
    /// Relative (and scaled absolute) integration tolerance.
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Parameter override `KEY=VALUE`, e.g. `--param beta_HM=0.2`.
    #[arg(long = "param", short = 'p', value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Use the printed carrying capacity instead of the calibrated one.
    #[arg(long)]
    pub table_k: bool,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(path) => Scenario::load(path)?,
            None => Scenario::new(self.model.unwrap_or(ModelTag::Sit)),
        };
        if let Some(m) = self.model {
            s.model = m;
        }
        if let Some(t) = self.horizon {
            s.horizon = t;
        }
        if let Some(r) = self.rtol {
            s.rtol = r;
        }
        if self.table_k {
            s.params.k = vector_release::params::TABLE_CARRYING_CAPACITY;
        }
        if !self.params.is_empty() {
            s.params = apply_overrides(&s.params, &self.params)?;
        }
        if let Some(dir) = &self.out {
            s.output.dir = Some(dir.clone());
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            bail!("horizon must be positive, got {}", s.horizon);
        }
        for v in s.params.ordering_violations() {
            log::warn!("{v}");
        }
        Ok(s)
    }
}

fn apply_overrides(
    params: &vector_release::EpiParams,
    overrides: &[String],
) -> Result<vector_release::EpiParams> {
    let mut table = toml::Table::try_from(params)?;
    for kv in overrides {
        let Some((key, value)) = kv.split_once('=') else {
            bail!("parameter override `{kv}` is not KEY=VALUE");
        };
        let key = key.trim();
        if !table.contains_key(key) {
            bail!("unknown parameter `{key}`");
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("parameter `{key}`: `{value}` is not a number"))?;
        table.insert(key.to_string(), toml::Value::Float(v));
    }
    let p: vector_release::EpiParams = table.try_into()?;
    p.validate()?;
    Ok(p)
}

/// Comma-separated numbers, e.g. `--times 100,150.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

impl std::str::FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    /// Comma-separated release times.
    #[arg(long)]
    pub times: Option<List>,
    /// Comma-separated release sizes (default: budget split evenly).
    #[arg(long)]
    pub weights: Option<List>,
    /// Total number of mosquitoes released.
    #[arg(long, short = 'C')]
    pub budget: Option<f64>,
    /// Replay a published schedule: sit10, sit20, sit10-fixed, sit20-fixed
    /// or wb; pick the row with `--budget`.
    #[arg(long, conflicts_with_all = ["times", "weights"])]
    pub case: Option<String>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    /// Number of releases.
    #[arg(long, short = 'n')]
    pub n: Option<usize>,
    /// Total number of mosquitoes released.
    #[arg(long, short = 'C')]
    pub budget: Option<f64>,
    /// times-only or times-and-weights.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// First seed; start i uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random starts.
    #[arg(long)]
    pub starts: Option<usize>,
    /// Iteration cap per start.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Run starts one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: ScenarioArgs,
    #[arg(long)]
    pub times: Option<List>,
    #[arg(long)]
    pub weights: Option<List>,
    #[arg(long, short = 'C')]
    pub budget: Option<f64>,
    /// Draw a random schedule with this many releases instead.
    #[arg(long, conflicts_with = "times")]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    /// Absolute floor of the relative error.
    #[arg(long, default_value_t = 1e-6)]
    pub floor: f64,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Table ids (default: all).
    pub tables: Vec<String>,
    /// Also run the multistart optimizer for every row.
    #[arg(long)]
    pub optimize: bool,
    #[arg(long, default_value_t = 5)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for the CSV and JSON reports.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// Exit with status 1 when a row fails.
    #[arg(long)]
    pub strict: bool,
    /// Run rows one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct PlotsArgs {
    /// Trajectory CSVs written by `simulate` or `optimize`.
    #[arg(required = true)]
    pub trajectories: Vec<PathBuf>,
    /// Uncontrolled trajectory to overlay (default: `baseline.csv` next to
    /// each input, when present).
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Directory for the scripts (default: next to each input).
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

pub fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// 2 for numerical failures of the core library, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<vector_release::Error>())
        .map_or(1, |e| if e.is_numerical() { 2 } else { 1 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Optimize(a) => commands::optimize::run(&a),
        Command::Analyze(a) => commands::analyze::run(&a),
        Command::Gradcheck(a) => commands::gradcheck::run(&a),
        Command::Reproduce(a) => commands::reproduce::run(&a),
        Command::Plots(a) => commands::plots::run(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
