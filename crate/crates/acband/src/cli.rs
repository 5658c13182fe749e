//! Command-line interface: `run`, `budget`, `gen`, and `eval`.
//!
//! A scenario file tells `run` where evaluations come from — a stored
//! runtime matrix, a generated one, or an external solver binary — and
//! the command line supplies the algorithm parameters. Runs over several
//! seeds execute on a small thread pool (capped by `ACBAND_THREADS`),
//! each seed writing its result document and event trace before an
//! aggregate table summarizes them. All files are written atomically:
//! a temporary sibling is renamed into place, so readers never observe a
//! half-written document.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::acband::{n_alpha_delta, run_acband, RunResult};
use crate::data::{generate_exponential_scenario, epsilon_best_set, load_matrix};
use crate::domain::{AcBandParams, ConfigId};
use crate::error::{Error, Result};
use crate::hyperband::{run_hyperband, HyperbandParams};
use crate::metrics::evaluate;
use crate::oracle::{MatrixOracle, Oracle, RuntimeMatrix};
use crate::runner::{ExternalOracle, ExternalRunnerSpec};
use crate::statistics::StatisticKind;
use crate::theory::{budget_curve, write_budget_curve_csv, N0Rule};
use crate::trace::write_jsonl;

#[derive(Debug, Parser)]
#[command(
    name = "acband",
    version,
    about = "Bandit-based algorithm configuration with capped parallel evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Configure on a scenario and write results, traces, and an
    /// aggregate table.
    Run(RunArgs),
    /// Tabulate sufficient budgets over a parameter grid.
    Budget(BudgetArgs),
    /// Generate a synthetic runtime matrix with known ground truth.
    Gen(GenArgs),
    /// Score a returned configuration against a runtime matrix.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Acband,
    Hyperband,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    WinFrequency,
    NegMeanRuntime,
}

impl StatArg {
    fn kind(self) -> StatisticKind {
        match self {
            StatArg::WinFrequency => StatisticKind::WinFrequency,
            StatArg::NegMeanRuntime => StatisticKind::NegMeanRuntime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Scenario file naming the evaluation source.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory for result, trace, and aggregate files.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds to run, one result per seed.
    #[arg(long, default_value = "0", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = Method::Acband)]
    pub method: Method,
    /// Group size for capped parallel evaluation.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Assumed fraction of epsilon-best configurations.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Failure probability of the sampling guarantee.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Optimality tolerance of the guarantee.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Pool size; 0 picks the largest admissible value, twice the
    /// sample target.
    #[arg(long, default_value_t = 0)]
    pub n0: u64,
    /// Total instance budget.
    #[arg(long)]
    pub budget: usize,
    #[arg(long, value_enum, default_value_t = StatArg::WinFrequency)]
    pub statistic: StatArg,
    /// Thinning factor of the baseline ladder.
    #[arg(long, default_value_t = 3.0)]
    pub eta: f64,
    /// Most exploratory bracket size of the baseline; required for the
    /// baseline method.
    #[arg(long, default_value_t = 0)]
    pub n_max: usize,
}

#[derive(Debug, clap::Args)]
pub struct BudgetArgs {
    #[arg(long, default_value = "2", value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, default_value = "0.05", value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, default_value = "0.05", value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Pool-size rule: n+1, 1.5n, or 2n.
    #[arg(long, default_value = "2n")]
    pub rule: String,
    /// Mean per-instance evaluation cost.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_bar: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n_configs: usize,
    #[arg(long)]
    pub n_instances: usize,
    /// Fraction of configurations placed inside the epsilon band.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 900.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Matrix destination.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
    pub format: MatrixFormat,
    /// Ground-truth sidecar destination; defaults to the matrix path
    /// with a `.scenario.json` extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Runtime matrix, either on-disk format.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Configuration to score; defaults to the winner of the run result
    /// given as --subset.
    #[arg(long)]
    pub winner: Option<usize>,
    /// JSON file restricting the comparison: either an id array or a run
    /// result document, whose sampled configurations are used.
    #[arg(long)]
    pub subset: Option<PathBuf>,
    /// Fraction of worst instances discarded by the trimmed mean.
    #[arg(long, default_value_t = 0.1)]
    pub delta_m: f64,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Scenario file: exactly one evaluation source.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dataset: Option<DatasetSpec>,
    pub synthetic: Option<SyntheticSpec>,
    pub external: Option<ExternalRunnerSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Matrix path, resolved against the scenario file's directory.
    pub path: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_configs: usize,
    pub n_instances: usize,
    pub target_alpha: f64,
    pub epsilon: f64,
    pub timeout: f64,
    pub seed: u64,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut file: ScenarioFile = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
        file.validate()?;
        if let (Some(ds), Some(dir)) = (&mut file.dataset, path.parent()) {
            if ds.path.is_relative() {
                ds.path = dir.join(&ds.path);
            }
        }
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        let sources =
            [self.dataset.is_some(), self.synthetic.is_some(), self.external.is_some()]
                .iter()
                .filter(|&&s| s)
                .count();
        if sources != 1 {
            return Err(Error::InvalidParameter(format!(
                "the scenario must define exactly one of dataset, synthetic, external; found {sources}"
            )));
        }
        Ok(())
    }

    /// Materialize the evaluation source.
    pub fn realize(&self) -> Result<LoadedScenario> {
        if let Some(ds) = &self.dataset {
            return Ok(LoadedScenario::Matrix(load_matrix(&ds.path)?));
        }
        if let Some(sy) = &self.synthetic {
            let (matrix, _) = generate_exponential_scenario(
                sy.n_configs,
                sy.n_instances,
                sy.target_alpha,
                sy.epsilon,
                sy.timeout,
                sy.seed,
            )?;
            return Ok(LoadedScenario::Matrix(matrix));
        }
        let spec = self.external.as_ref().expect("validated to hold one source");
        spec.validate()?;
        Ok(LoadedScenario::External(spec.clone()))
    }
}

/// A realized evaluation source, shared read-only across seed workers.
pub enum LoadedScenario {
    Matrix(RuntimeMatrix),
    External(ExternalRunnerSpec),
}

impl LoadedScenario {
    /// Fresh oracle session for one seed.
    pub fn session(&self, seed: u64) -> Result<Box<dyn Oracle + '_>> {
        match self {
            LoadedScenario::Matrix(m) => Ok(Box::new(MatrixOracle::new(m, seed))),
            LoadedScenario::External(spec) => Ok(Box::new(ExternalOracle::new(spec.clone())?)),
        }
    }
}

/// Worker count: `ACBAND_THREADS` when set, otherwise the machine's
/// parallelism, never more than one per seed.
fn thread_budget(seats: usize, env: Option<&str>) -> Result<usize> {
    let cap = match env {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "ACBAND_THREADS must be a positive integer, got {v:?}"
                ))
            })?,
        None => thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    Ok(cap.min(seats).max(1))
}

/// Write through a temporary sibling and rename into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no file name", path.display())))?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone)]
struct SeedSummary {
    seed: u64,
    winner: usize,
    cpu_seconds: f64,
    /// Budget units consumed: instance evaluations.
    units: usize,
}

fn resolve_n0(args: &RunArgs) -> Result<u64> {
    if args.n0 != 0 {
        return Ok(args.n0);
    }
    Ok(2 * n_alpha_delta(args.alpha, args.delta)?)
}

fn run_one_seed(scenario: &LoadedScenario, args: &RunArgs, seed: u64) -> Result<SeedSummary> {
    let mut oracle = scenario.session(seed)?;
    let (summary, result_json, events) = match args.method {
        Method::Acband => {
            let params = AcBandParams {
                k: args.k,
                alpha: args.alpha,
                delta: args.delta,
                epsilon: args.epsilon,
                n0: resolve_n0(args)?,
                budget: args.budget,
                seed,
            };
            let result = run_acband(&params, oracle.as_mut(), args.statistic.kind())?;
            let summary = SeedSummary {
                seed,
                winner: result.winner.0,
                cpu_seconds: result.cpu.total_seconds,
                units: result.total_instances_used,
            };
            let json = serde_json::to_vec_pretty(&result)?;
            (summary, json, result.events)
        }
        Method::Hyperband => {
            if args.n_max == 0 {
                return Err(Error::InvalidParameter(
                    "--n-max is required for the hyperband method".to_string(),
                ));
            }
            let params = HyperbandParams {
                eta: args.eta,
                n_max: args.n_max,
                budget: args.budget,
                seed,
            };
            let result = run_hyperband(&params, oracle.as_mut())?;
            let summary = SeedSummary {
                seed,
                winner: result.winner.0,
                cpu_seconds: result.cpu_seconds,
                units: result.total_evaluations,
            };
            let json = serde_json::to_vec_pretty(&result)?;
            (summary, json, result.events)
        }
    };
    write_atomic(&args.out.join(format!("run_seed{seed}.json")), &result_json)?;
    let mut jsonl = Vec::new();
    write_jsonl(&events, &mut jsonl)?;
    write_atomic(&args.out.join(format!("trace_seed{seed}.jsonl")), &jsonl)?;
    Ok(summary)
}

fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_aggregate(path: &Path, rows: &[SeedSummary]) -> Result<()> {
    let mut csv = String::from("seed,winner,cpu_seconds,instances\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.seed, row.winner, row.cpu_seconds, row.units
        ));
    }
    let cpus: Vec<f64> = rows.iter().map(|r| r.cpu_seconds).collect();
    let units: Vec<f64> = rows.iter().map(|r| r.units as f64).collect();
    let (cpu_mean, cpu_std) = mean_and_sample_std(&cpus);
    let (unit_mean, unit_std) = mean_and_sample_std(&units);
    csv.push_str(&format!("mean,,{cpu_mean},{unit_mean}\n"));
    csv.push_str(&format!("stddev,,{cpu_std},{unit_std}\n"));
    write_atomic(path, csv.as_bytes())
}

/// Write to stdout, surfacing failures as errors instead of panicking the
/// way `println!` does. A reader that stops consuming (`head`, a closed
/// pager) shows up as a `BrokenPipe` error the caller can exit quietly on.
fn emit_raw(text: &str) -> Result<()> {
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn emit_line(text: &str) -> Result<()> {
    emit_raw(text)?;
    emit_raw("\n")
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    if args.seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one seed is required".to_string(),
        ));
    }
    let distinct: BTreeSet<u64> = args.seeds.iter().copied().collect();
    if distinct.len() != args.seeds.len() {
        return Err(Error::InvalidParameter(
            "duplicate seeds would overwrite each other's output files".to_string(),
        ));
    }
    let scenario = ScenarioFile::load(&args.scenario)?.realize()?;
    fs::create_dir_all(&args.out)?;

    let workers = thread_budget(args.seeds.len(), std::env::var("ACBAND_THREADS").ok().as_deref())?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SeedSummary>>>> =
        Mutex::new((0..args.seeds.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= args.seeds.len() {
                    break;
                }
                let outcome = run_one_seed(&scenario, args, args.seeds[i]);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });

    let mut rows = Vec::with_capacity(args.seeds.len());
    for slot in slots.into_inner().expect("workers have finished") {
        rows.push(slot.expect("every seed slot is filled")?);
    }
    // All artifacts land on disk before the first stdout write, so a
    // truncated pipe can never cost the aggregate table.
    let aggregate = args.out.join("aggregate.csv");
    write_aggregate(&aggregate, &rows)?;
    for row in &rows {
        emit_line(&format!(
            "seed {}: winner {}, cpu {:.3}s, {} instance evaluations",
            row.seed, row.winner, row.cpu_seconds, row.units
        ))?;
    }
    emit_line(&format!("wrote {}", aggregate.display()))?;
    Ok(())
}

fn cmd_budget(args: &BudgetArgs) -> Result<()> {
    let rule = N0Rule::parse(&args.rule)?;
    let points = budget_curve(&args.k, &args.alpha, &args.delta, rule, args.gamma_bar)?;
    let mut csv = Vec::new();
    write_budget_curve_csv(&points, &mut csv)?;
    match &args.out {
        Some(path) => {
            write_atomic(path, &csv)?;
            emit_line(&format!("wrote {} rows to {}", points.len(), path.display()))?;
        }
        None => emit_raw(&String::from_utf8_lossy(&csv))?,
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let (matrix, scenario) = generate_exponential_scenario(
        args.n_configs,
        args.n_instances,
        args.alpha,
        args.epsilon,
        args.timeout,
        args.seed,
    )?;
    match args.format {
        MatrixFormat::Csv => matrix.write_csv(&args.out)?,
        MatrixFormat::Binary => matrix.write_binary(&args.out)?,
    }
    let sidecar = args
        .sidecar
        .clone()
        .unwrap_or_else(|| args.out.with_extension("scenario.json"));
    crate::data::save_scenario(&sidecar, &scenario)?;
    let band = epsilon_best_set(&scenario.lambdas, scenario.epsilon).len();
    emit_line(&format!(
        "wrote {}x{} matrix to {} ({} epsilon-best), ground truth in {}",
        args.n_configs,
        args.n_instances,
        args.out.display(),
        band,
        sidecar.display()
    ))?;
    Ok(())
}

/// Subset file contents: a bare id array, or a run result whose sampled
/// configurations form the subset.
fn parse_subset(path: &Path) -> Result<(Vec<ConfigId>, Option<ConfigId>)> {
    let text = fs::read_to_string(path)?;
    if let Ok(ids) = serde_json::from_str::<Vec<usize>>(&text) {
        return Ok((ids.into_iter().map(ConfigId).collect(), None));
    }
    if let Ok(result) = serde_json::from_str::<RunResult>(&text) {
        let mut set: BTreeSet<ConfigId> = BTreeSet::new();
        for epoch in &result.epochs {
            set.insert(epoch.carried);
            set.extend(epoch.fresh.iter().copied());
        }
        set.insert(result.winner);
        return Ok((set.into_iter().collect(), Some(result.winner)));
    }
    Err(Error::MalformedFile(format!(
        "{} is neither an id array nor a run result",
        path.display()
    )))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let matrix = load_matrix(&args.matrix)?;
    let (subset, result_winner) = match &args.subset {
        Some(path) => {
            let (ids, winner) = parse_subset(path)?;
            (Some(ids), winner)
        }
        None => (None, None),
    };
    let winner = args
        .winner
        .map(ConfigId)
        .or(result_winner)
        .ok_or_else(|| {
            Error::InvalidParameter(
                "eval needs --winner, or --subset pointing at a run result".to_string(),
            )
        })?;
    let report = evaluate(&matrix, winner, subset.as_deref(), args.delta_m)?;
    let json = serde_json::to_vec_pretty(&report)?;
    match &args.out {
        Some(path) => {
            write_atomic(path, &json)?;
            emit_line(&format!("wrote {}", path.display()))?;
        }
        None => emit_line(&String::from_utf8_lossy(&json))?,
    }
    Ok(())
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        CliCommand::Run(args) => cmd_run(args),
        CliCommand::Budget(args) => cmd_budget(args),
        CliCommand::Gen(args) => cmd_gen(args),
        CliCommand::Eval(args) => cmd_eval(args),
    }
}

/// Process exit code for an error: 2 for parameter problems, 4 for
/// budgets too small to schedule, 3 for everything touching data or
/// execution.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) | Error::InvalidN0 { .. } | Error::InfeasibleAlpha(_) => 2,
        Error::InsufficientBudget(_) => 4,
        _ => 3,
    }
}
