use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use approxsel_core::harness::{
    run_drift, run_trials, summarize, ArmSummary, DriftRow, TrialReport,
};
use approxsel_core::sampling::BudgetedOracle;
use approxsel_core::synth::gen_beta;
use approxsel_core::{run_query, BetaSpec, Dataset, QueryKind, ResultSet};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset_file::{read_dataset, save_dataset, write_dataset};
use crate::error::{CliError, Result};
use crate::experiment_file::parse_experiment;
use crate::query_file::parse_query;

#[derive(Debug, Parser)]
#[command(
    name = "approxsel",
    version,
    about = "Approximate selection queries under an oracle budget"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a Beta-distributed synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Run one query against a dataset file.
    Query(QueryArgs),
    /// Run a repeated-trial experiment and write reports and a summary.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub size: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    /// Overrides the query file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// File for the selected ids; they go to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Hard cap on distinct oracle calls, including joint-target filtering.
    #[arg(long)]
    pub oracle_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for `reports.csv` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configuration's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub parallel: Option<usize>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

pub fn generate(args: &GenerateArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = BetaSpec::new(args.alpha, args.beta, args.size, args.seed).with_noise(args.noise_sd);
    spec.validate()
        .map_err(|e| CliError::config("<arguments>", e.to_string()))?;
    let dataset = gen_beta(&spec)?;
    let positives = dataset.positive_count()?;
    match &args.out {
        Some(path) => {
            save_dataset(path, &dataset)?;
            writeln!(
                stdout,
                "wrote {} records ({positives} positive) to {}",
                dataset.len(),
                path.display()
            )
            .map_err(stdout_err)?;
        }
        None => write_dataset(&mut *stdout, &dataset).map_err(stdout_err)?,
    }
    Ok(())
}

/// Summary lines printed after a query.
pub fn describe(result: &ResultSet, kind: QueryKind) -> Vec<String> {
    let mut lines = vec![
        format!("tau: {}", result.tau),
        format!("oracle_calls: {}", result.oracle_calls),
        format!("draws: {}", result.draws),
        format!("result_size: {}", result.len()),
        format!("threshold_selected: {}", result.threshold_selected),
    ];
    if result.threshold_selected == 0 {
        lines.push(
            "note: no record passed the threshold; result holds sampled positives only".into(),
        );
    }
    if let (QueryKind::JointTarget, Some(j)) = (kind, result.joint) {
        lines.push(format!("threshold_calls: {}", j.threshold_calls));
        lines.push(format!("filter_calls: {}", j.filter_calls));
    }
    lines
}

pub fn query(args: &QueryArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let dataset: Dataset = read_dataset(&args.data)?;
    let file = parse_query(&read_text(&args.query)?, &args.query)?;
    let (mut spec, config) = file.resolve(&args.query)?;
    if let Some(seed) = args.seed {
        spec = spec.with_seed(seed);
    }
    let mut oracle = BudgetedOracle::new(&dataset, spec.budget());
    if let Some(limit) = args.oracle_limit {
        oracle = oracle.with_hard_limit(limit);
    }
    let result = run_query(&dataset, &spec, &config, &mut oracle)?;

    let mut ids = String::new();
    for id in result.ids(&dataset) {
        ids.push_str(&id.to_string());
        ids.push('\n');
    }
    let summary = describe(&result, spec.kind()).join("\n") + "\n";
    match &args.out {
        Some(path) => {
            fs::write(path, ids).map_err(|e| CliError::io(path, e))?;
            stdout.write_all(summary.as_bytes()).map_err(stdout_err)?;
        }
        None => {
            stdout.write_all(ids.as_bytes()).map_err(stdout_err)?;
            stderr.write_all(summary.as_bytes()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary {
    arms: Vec<ArmSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<Vec<DriftRow>>,
}

pub fn write_reports(path: &Path, reports: &[TrialReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e.into()))?;
    for r in reports {
        w.serialize(r).map_err(|e| CliError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn run_experiment(args: &ExperimentArgs) -> Result<(Vec<TrialReport>, Summary)> {
    let file = parse_experiment(&read_text(&args.config)?, &args.config)?;
    let mut experiment = file.resolve(&args.config)?;
    if let Some(seed) = args.seed {
        experiment.config.base_seed = seed;
    }
    let config = &experiment.config;
    match &experiment.train {
        None => {
            let reports = run_trials(config)?;
            let arms = summarize(&reports)?;
            Ok((reports, Summary { arms, drift: None }))
        }
        Some(train) => {
            let train = train.materialize()?;
            let test = config.source.materialize()?;
            let (rows, reports) =
                run_drift(&train, &test, &config.arms, config.trials, config.base_seed)?;
            let arms = rows.iter().map(|r| r.budgeted.clone()).collect();
            Ok((
                reports,
                Summary {
                    arms,
                    drift: Some(rows),
                },
            ))
        }
    }
}

pub fn experiment(args: &ExperimentArgs, stdout: &mut dyn Write) -> Result<()> {
    let (reports, summary) = match args.parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::config("<arguments>", e.to_string()))?
            .install(|| run_experiment(args))?,
        None => run_experiment(args)?,
    };
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let reports_path = args.out.join("reports.csv");
    write_reports(&reports_path, &reports)?;
    let summary_path = args.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    fs::write(&summary_path, json).map_err(|e| CliError::io(&summary_path, e))?;
    for arm in &summary.arms {
        writeln!(
            stdout,
            "{}: failure_rate {:.3} over {} trials",
            arm.arm, arm.failure_rate, arm.trials
        )
        .map_err(stdout_err)?;
    }
    Ok(())
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a, stdout),
        Command::Query(a) => query(a, stdout, stderr),
        Command::Experiment(a) => experiment(a, stdout),
    }
}
