//! Batch command-line front end: synthetic benchmarks, panel estimation, and
//! the full corpus query pipeline. Outputs are deterministic given identical
//! inputs, flags, and seed (benchmark runtimes excepted).
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error,
//! 3 no-cutoff diagnostic (query).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use setevolve::corpus::{
    self, bm25_rank, build_panel, gamma_curve, index_corpus, link_entities, select_cutoff,
    EntityVocabulary, WindowSpec,
};
use setevolve::evolve::{default_bandwidth, default_lambda, estimate_series, KernelSpec};
use setevolve::glasso::SolverOptions;
use setevolve::nonparanormal::fit_copula;
use setevolve::panel::ObservationPanel;
use setevolve::synthbench::{run_benchmark, run_setevolve, BenchConfig, EvolutionKind};

#[derive(Parser)]
#[command(
    name = "setevolve",
    version,
    about = "Evolutionary entity networks from observation panels and text corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic benchmark and write a report
    Bench(BenchArgs),
    /// Estimate a network series from a panel JSON file
    Estimate(EstimateArgs),
    /// Full query pipeline: rank, link, cutoff, panel, series
    Query(QueryArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Number of variables
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// Evolution pattern: local or global
    #[arg(long, default_value = "local")]
    evolution: String,
    #[arg(long, default_value_t = 100)]
    timestamps: usize,
    /// Timestamp at which the evolution occurs; defaults to half of --timestamps
    #[arg(long)]
    change_point: Option<usize>,
    #[arg(long, default_value_t = 10)]
    samples_per_t: usize,
    #[arg(long, default_value_t = 10)]
    max_value: u32,
    /// Poisson noise rate added to every count
    #[arg(long, default_value_t = 0.0)]
    noise_rate: f64,
    #[arg(long, default_value_t = 0.15)]
    edge_density: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.45)]
    bandwidth_constant: f64,
    /// Fix the penalty constant instead of selecting it from the grid
    #[arg(long)]
    lambda_constant: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Kernel bandwidth in evolving-dimension units (overrides the schedule)
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Bandwidth constant for the n^(-1/6) schedule
    #[arg(long, default_value_t = 1.0)]
    bandwidth_constant: f64,
    /// Penalty value (overrides the schedule and the grid)
    #[arg(long)]
    lambda: Option<f64>,
    /// Penalty constant for the schedule; when absent, a small grid is
    /// searched for the most stable series
    #[arg(long)]
    lambda_constant: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
}

impl EstimatorArgs {
    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            support_threshold: 1e-6,
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Panel JSON file
    #[arg(long)]
    panel: PathBuf,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Corpus JSONL file ({"id", "text", "ordinal"} per line)
    #[arg(long)]
    corpus: PathBuf,
    /// Vocabulary TSV file (surface<TAB>entityId)
    #[arg(long)]
    vocab: PathBuf,
    /// Query string
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    #[arg(long, default_value_t = corpus::DEFAULT_GAMMA_THRESHOLD)]
    gamma_threshold: f64,
    #[arg(long, default_value_t = corpus::DEFAULT_CONVERGENCE_TOL)]
    convergence_tol: f64,
    /// Width of the ordinal buckets that become timestamps
    #[arg(long, default_value_t = 5.0)]
    window_width: f64,
    /// First window edge; defaults to the smallest selected ordinal
    #[arg(long)]
    window_start: Option<f64>,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Runtime(String),
    NoCutoff(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => cmd_bench(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Query(args) => cmd_query(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::NoCutoff(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let evolution: EvolutionKind = args.evolution.parse().map_err(CliError::usage)?;
    let mut config = BenchConfig::new(args.m, evolution, args.seed);
    config.timestamps = args.timestamps;
    config.change_point = args.change_point.unwrap_or((args.timestamps / 2).max(1));
    config.samples_per_t = args.samples_per_t;
    config.max_value = args.max_value;
    config.noise_rate = args.noise_rate;
    config.edge_density = args.edge_density;
    config.bandwidth_constant = args.bandwidth_constant;
    config.lambda_constant = args.lambda_constant;
    config.validate().map_err(CliError::usage)?;

    let report = run_benchmark(&config).map_err(CliError::runtime)?;
    write_file(&args.out, "report.json", &report.to_json())?;
    write_file(&args.out, "report.txt", &report.to_table())?;
    print!("{}", report.to_table());
    Ok(())
}

/// Estimates the series with the argument precedence: explicit lambda, then
/// the schedule with a fixed constant, then the stability grid.
fn estimate_with_args(
    panel: &ObservationPanel,
    est: &EstimatorArgs,
) -> Result<setevolve::evolve::NetworkSeries, setevolve::Error> {
    let opts = est.solver();
    let n = panel.total_samples();
    let h = match est.bandwidth {
        Some(h) => h,
        None => default_bandwidth(n, est.bandwidth_constant, panel.span())?,
    };
    if let Some(lambda) = est.lambda {
        let spec = KernelSpec::boxcar(h)?;
        return estimate_series(panel, &spec, lambda, &opts);
    }
    if let Some(c) = est.lambda_constant {
        let lambda = default_lambda(n, panel.num_entities(), c)?;
        let spec = KernelSpec::boxcar(h)?;
        return estimate_series(panel, &spec, lambda, &opts);
    }
    let constant = match est.bandwidth {
        // run_setevolve derives h from the constant; recover it when the
        // bandwidth was given in absolute units
        Some(h) => h / (default_bandwidth(n, 1.0, panel.span())?),
        None => est.bandwidth_constant,
    };
    run_setevolve(panel, constant, None, &opts).map(|(series, _)| series)
}

fn write_series_outputs(
    dir: &Path,
    series: &setevolve::evolve::NetworkSeries,
) -> Result<(), CliError> {
    write_file(dir, "series.json", &series.to_json())?;
    for (idx, t) in series.timestamps.iter().enumerate() {
        write_file(dir, &format!("network_t{t}.dot"), &series.to_dot(idx))?;
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let text = read_file(&args.panel)?;
    let panel = ObservationPanel::from_json(&text).map_err(CliError::usage)?;

    // a panel supplied explicitly must not contain constant entities
    let model = fit_copula(&panel).map_err(CliError::runtime)?;
    if !model.rejected().is_empty() {
        let names: Vec<&str> = model
            .rejected()
            .iter()
            .map(|&j| panel.entity_names()[j].as_str())
            .collect();
        return Err(CliError::Runtime(format!(
            "constant entities rejected: {}",
            names.join(", ")
        )));
    }

    let series = estimate_with_args(&panel, &args.estimator).map_err(CliError::runtime)?;
    write_series_outputs(&args.out, &series)?;
    println!(
        "estimated {} timestamps over {} entities (lambda = {})",
        series.timestamps.len(),
        series.num_entities(),
        series.hyperparameters.lambda
    );
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<(), CliError> {
    let corpus_text = read_file(&args.corpus)?;
    let documents = corpus::read_corpus_jsonl(&corpus_text).map_err(CliError::usage)?;
    let vocab_text = read_file(&args.vocab)?;
    let vocab = EntityVocabulary::from_tsv(&vocab_text).map_err(CliError::usage)?;
    let index = index_corpus(documents).map_err(CliError::usage)?;
    let ranked = bm25_rank(&args.query, &index, args.k1, args.b).map_err(CliError::usage)?;

    if ranked.is_empty() {
        write_file(
            &args.out,
            "gamma_curve.csv",
            "n,unionSize,gamma,gammaPrime\n",
        )?;
        return Err(CliError::NoCutoff(format!(
            "no documents match query '{}'; empty ranking has no cutoff",
            args.query
        )));
    }

    let counts: Vec<corpus::EntityCounts> = ranked
        .iter()
        .map(|(doc, _)| link_entities(doc, &vocab))
        .collect();
    let entity_sets: Vec<BTreeSet<String>> =
        counts.iter().map(|c| c.keys().cloned().collect()).collect();
    let curve = gamma_curve(&entity_sets).map_err(CliError::runtime)?;
    write_file(&args.out, "gamma_curve.csv", &curve.to_csv())?;

    let Some(n_star) = select_cutoff(&curve, args.gamma_threshold, args.convergence_tol) else {
        return Err(CliError::NoCutoff(format!(
            "no cutoff found over {} ranked documents (threshold {}, tolerance {}); \
             gamma curve written for diagnosis",
            curve.len(),
            args.gamma_threshold,
            args.convergence_tol
        )));
    };

    let selected: Vec<corpus::Document> = ranked[..n_star]
        .iter()
        .map(|(doc, _)| (*doc).clone())
        .collect();
    let selected_counts = &counts[..n_star];
    let entity_set: BTreeSet<String> = entity_sets[..n_star]
        .iter()
        .flat_map(|s| s.iter().cloned())
        .collect();
    println!(
        "cutoff n* = {n_star} (union of {} entities, gamma = {:.4})",
        entity_set.len(),
        curve.points[n_star - 1].gamma.unwrap_or(f64::NAN)
    );

    let ordinals: Vec<f64> = selected.iter().map(|d| d.ordinal).collect();
    let min = ordinals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ordinals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let start = args.window_start.unwrap_or(min);
    let window = WindowSpec::covering(start, max, args.window_width).map_err(CliError::usage)?;
    let (panel, warnings) =
        build_panel(&selected, selected_counts, &entity_set, &window).map_err(CliError::runtime)?;
    for id in &warnings.excluded_documents {
        eprintln!("warning: document {id} falls outside the window range");
    }
    for midpoint in &warnings.empty_windows {
        eprintln!("warning: window at {midpoint} is empty and was dropped");
    }
    write_file(&args.out, "panel.json", &panel.to_json())?;

    let series = estimate_with_args(&panel, &args.estimator).map_err(CliError::runtime)?;
    for name in &series.rejected_entities {
        eprintln!("warning: entity {name} has constant counts and was dropped");
    }
    write_series_outputs(&args.out, &series)?;
    println!(
        "estimated {} timestamps over {} entities (lambda = {})",
        series.timestamps.len(),
        series.num_entities(),
        series.hyperparameters.lambda
    );
    Ok(())
}
