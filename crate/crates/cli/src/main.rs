use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bmatch_core::bench::{
    compare, run, Algo, ComparisonTable, PredictorChoice, RunInputs, RunReport,
};
use bmatch_core::gen::parse_capacity_rule;
use bmatch_core::io::{
    read_instance, read_matching, read_thresholds, write_instance, write_matching, write_thresholds,
};
use bmatch_core::{
    generate, perturb, verify_feasible, CapacityRule, DegreeDist, ExactLimits, GeneratorConfig,
    WeightDist,
};

#[derive(Parser)]
#[command(
    name = "bmatch",
    version,
    about = "Maximum-weight bipartite b-matching toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print a JSON report line.
    Solve(SolveArgs),
    /// Generate a synthetic instance.
    Gen(GenArgs),
    /// Add Gaussian noise to every edge weight.
    Perturb(PerturbArgs),
    /// Check a matching against an instance's capacities.
    Verify(VerifyArgs),
    /// Solve a small instance to optimality.
    Exact(ExactArgs),
    /// Run several algorithms on several instances and cross-check them.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Bsuitor,
    Pivot,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    Oracle,
    Warmstart,
    Quantile,
    File,
}

impl From<PredictorArg> for PredictorChoice {
    fn from(p: PredictorArg) -> Self {
        match p {
            PredictorArg::Oracle => PredictorChoice::Oracle,
            PredictorArg::Warmstart => PredictorChoice::Warmstart,
            PredictorArg::Quantile => PredictorChoice::Quantile,
            PredictorArg::File => PredictorChoice::File,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    algo: SolverArg,
    /// Pivot source. Defaults to `file` with --pivots, `warmstart` with
    /// --warm, `quantile` otherwise.
    #[arg(long, value_enum)]
    predictor: Option<PredictorArg>,
    /// Raw-weight predictions (.piv).
    #[arg(long, value_name = "FILE.piv")]
    pivots: Option<PathBuf>,
    /// Thresholds from a previous solve (.thr).
    #[arg(long, value_name = "FILE.thr")]
    warm: Option<PathBuf>,
    #[arg(short = 'i', value_name = "FILE.bmg")]
    input: PathBuf,
    /// Matching output.
    #[arg(short = 'o', value_name = "FILE.match")]
    output: Option<PathBuf>,
    /// Append the report to this file.
    #[arg(long, value_name = "FILE.jsonl")]
    report: Option<PathBuf>,
    /// Write the final per-ad thresholds, e.g. for a later --warm.
    #[arg(long, value_name = "FILE.thr")]
    thresholds_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Recorded in the report.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    ads: Option<usize>,
    #[arg(long)]
    consumers: Option<usize>,
    /// full | fixed:K | uniform:MIN:MAX | powerlaw:EXP:MIN:MAX
    #[arg(long, default_value = "full")]
    degree: DegreeDist,
    /// uniform:LOW:HIGH | exp:RATE | int:LOW:HIGH
    #[arg(long, default_value = "uniform:1:5")]
    weights: WeightDist,
    /// half-degree | uniform:AD:CONSUMER
    #[arg(long, default_value = "half-degree", value_parser = parse_capacity_rule)]
    capacity: CapacityRule,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Named fixture; overrides the distribution flags.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(short = 'o', value_name = "FILE.bmg")]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// The two-ad, four-consumer worked example.
    Fig1,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(short = 'i', value_name = "FILE.bmg")]
    input: PathBuf,
    #[arg(short = 'o', value_name = "FILE.bmg")]
    output: PathBuf,
    /// Noise variance.
    #[arg(long, default_value_t = 0.1)]
    sigma_sq: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(short = 'i', value_name = "FILE.bmg")]
    input: PathBuf,
    #[arg(short = 'm', value_name = "FILE.match")]
    matching: PathBuf,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(short = 'i', value_name = "FILE.bmg")]
    input: PathBuf,
    #[arg(short = 'o', value_name = "FILE.match")]
    output: Option<PathBuf>,
    /// Stop after this many search nodes. Lifts the edge-count limit.
    #[arg(long)]
    node_budget: Option<u64>,
    /// Refuse larger instances unless a node budget is given.
    #[arg(long, default_value_t = ExactLimits::default().max_edges)]
    max_edges: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(short = 'i', value_name = "FILE.bmg", required = true)]
    inputs: Vec<PathBuf>,
    /// Comma-separated: greedy, bsuitor, exact, pivot:<predictor>.
    #[arg(long, value_delimiter = ',', required = true)]
    algos: Vec<Algo>,
    /// One threshold file for all instances, or one per instance.
    #[arg(long, value_name = "FILE.thr")]
    warm: Vec<PathBuf>,
    /// One prediction file for all instances, or one per instance.
    #[arg(long, value_name = "FILE.piv")]
    pivots: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_name = "FILE.jsonl")]
    report: Option<PathBuf>,
    #[arg(long)]
    node_budget: Option<u64>,
}

fn append_reports<'a>(path: &Path, reports: impl IntoIterator<Item = &'a RunReport>) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    for r in reports {
        writeln!(file, "{}", r.to_json_line())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let algo = match args.algo {
        SolverArg::Greedy => Algo::Greedy,
        SolverArg::Bsuitor => Algo::BSuitor,
        SolverArg::Pivot => Algo::Pivot(match args.predictor {
            Some(p) => p.into(),
            None if args.pivots.is_some() => PredictorChoice::File,
            None if args.warm.is_some() => PredictorChoice::Warmstart,
            None => PredictorChoice::Quantile,
        }),
    };
    if !matches!(algo, Algo::Pivot(_)) && args.predictor.is_some() {
        log::warn!("--predictor only applies to --algo pivot");
    }
    let inputs = RunInputs {
        warm: args.warm.as_deref().map(read_thresholds).transpose()?,
        pivots_file: args.pivots,
        seed: args.seed,
        ..RunInputs::default()
    };
    let outcome = run(&instance, algo, args.threads, &inputs)?;
    if let Some(path) = &args.output {
        write_matching(&outcome.matching, path)?;
    }
    if let (Some(path), Some(t)) = (&args.thresholds_out, &outcome.thresholds) {
        write_thresholds(t, path)?;
    }
    if let Some(path) = &args.report {
        append_reports(path, [&outcome.report])?;
    }
    println!("{}", outcome.report.to_json_line());
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let config = match args.preset {
        Some(Preset::Fig1) => {
            let config = GeneratorConfig::fig1();
            ensure!(
                args.ads.unwrap_or(config.num_ads) == config.num_ads
                    && args.consumers.unwrap_or(config.num_consumers) == config.num_consumers,
                "preset fig1 has {} ads and {} consumers",
                config.num_ads,
                config.num_consumers
            );
            config
        }
        None => GeneratorConfig {
            num_ads: args.ads.context("--ads is required without --preset")?,
            num_consumers: args
                .consumers
                .context("--consumers is required without --preset")?,
            degrees: args.degree,
            weights: args.weights,
            capacity: args.capacity,
            seed: args.seed,
        },
    };
    let instance = generate(&config)?;
    write_instance(&instance, &args.output)?;
    log::info!(
        "wrote {} ({} ads, {} consumers, {} edges)",
        args.output.display(),
        instance.num_ads(),
        instance.num_consumers(),
        instance.num_edges()
    );
    Ok(())
}

fn cmd_perturb(args: PerturbArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let noisy = perturb(&instance, args.sigma_sq, args.seed)?;
    write_instance(&noisy, &args.output)?;
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let matching = read_matching(&args.matching, &instance)?;
    let report = verify_feasible(&instance, &matching)?;
    if !report.is_feasible() {
        for v in &report.violations {
            println!("violation: {v}");
        }
        bail!("{} capacity violations", report.violations.len());
    }
    println!(
        "feasible: {} edges, value {}",
        matching.len(),
        matching.total_weight()
    );
    Ok(())
}

fn cmd_exact(args: ExactArgs) -> Result<()> {
    let instance = read_instance(&args.input)?;
    let limits = ExactLimits {
        max_edges: args.max_edges,
        node_budget: args.node_budget,
    };
    let result = bmatch_core::solve_exact(&instance, limits)?;
    if let Some(path) = &args.output {
        write_matching(&result.optimal_matching, path)?;
    }
    println!(
        "optimal value {} ({} edges, {} search nodes)",
        result.optimal_value,
        result.optimal_matching.len(),
        result.node_count
    );
    Ok(())
}

/// Picks the file for instance `i` from a list that is empty, has one entry
/// for all instances, or has one entry per instance.
fn per_instance<'a>(
    files: &'a [PathBuf],
    i: usize,
    instances: usize,
    flag: &str,
) -> Result<Option<&'a Path>> {
    match files.len() {
        0 => Ok(None),
        1 => Ok(Some(&files[0])),
        n if n == instances => Ok(Some(&files[i])),
        n => bail!("{flag} given {n} times for {instances} instances"),
    }
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    ensure!(
        args.algos.len() >= 2,
        "compare needs at least two algorithms"
    );
    let mut table = ComparisonTable::default();
    for (i, path) in args.inputs.iter().enumerate() {
        let instance = read_instance(path)?;
        let limits = ExactLimits {
            node_budget: args.node_budget,
            ..ExactLimits::default()
        };
        let inputs = RunInputs {
            warm: per_instance(&args.warm, i, args.inputs.len(), "--warm")?
                .map(read_thresholds)
                .transpose()?,
            pivots_file: per_instance(&args.pivots, i, args.inputs.len(), "--pivots")?
                .map(Path::to_path_buf),
            exact_limits: limits,
            seed: None,
        };
        let name = path.display().to_string();
        let part = compare(&[(name, instance)], &args.algos, args.threads, &inputs)?;
        table.rows.extend(part.rows);
        table.mismatches.extend(part.mismatches);
    }
    print!("{table}");
    if let Some(path) = &args.report {
        append_reports(path, table.reports())?;
    }
    table.check()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Solve(a) => cmd_solve(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
