//! `tenrank`: synthesize low-rank tensors, decompose them, score core
//! consistency, scan ranks with the automatic selectors, and run the seeded
//! rank-recovery experiment.
//!
//! Exit codes: 0 success, 1 runtime/I/O failure, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use tenrank::{
    autoten, autoten_mv, autoten_rec, baseline1, corcondia, cp_als, emit_report, holdout_split, io,
    run_experiment, scan, synth_kruskal, AlsOptions, Error, ExperimentConfig, RankDecision,
    SelectorMethod, BASELINE1_EPSILON,
};

#[derive(Parser)]
#[command(name = "tenrank", version, about = "CP tensor rank estimation toolkit")]
struct Cli {
    /// Cap worker threads for rank scans and experiment trials
    /// (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random low-rank tensor plus its ground-truth factors.
    Synth(SynthArgs),
    /// Decompose a tensor at a fixed rank and write the factor model.
    Decompose(DecomposeArgs),
    /// Core consistency of a model (fitted here or loaded) on a tensor.
    Corcondia(CorcondiaArgs),
    /// Decompose at every rank in a range and apply the rank selectors.
    Scan(ScanArgs),
    /// Run the seeded synthetic rank-recovery experiment.
    Experiment(ExperimentArgs),
}

fn parse_dims(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated dimensions, got `{s}`"
        ));
    }
    let mut dims = [0usize; 3];
    for (slot, part) in dims.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad dimension `{part}`: {e}"))?;
        if *slot == 0 {
            return Err("dimensions must be positive".into());
        }
    }
    Ok((dims[0], dims[1], dims[2]))
}

fn parse_positive(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("bad value `{s}`: {e}"))?;
    if v < 1 {
        return Err("value must be >= 1".into());
    }
    Ok(v)
}

#[derive(Clone)]
struct RankSet(Vec<usize>);

fn parse_rank_set(s: &str) -> Result<RankSet, String> {
    let parse_one = |p: &str| -> Result<usize, String> {
        p.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad rank `{p}`: {e}"))
    };
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (parse_one(lo)?, parse_one(hi)?);
        if lo < 1 || lo > hi {
            return Err(format!("bad rank range `{s}`"));
        }
        return Ok(RankSet((lo..=hi).collect()));
    }
    let ranks: Vec<usize> = s.split(',').map(parse_one).collect::<Result<_, _>>()?;
    if ranks.is_empty() || ranks.iter().any(|&r| r < 1) {
        return Err("ranks must be >= 1".into());
    }
    Ok(RankSet(ranks))
}

#[derive(Args)]
struct SolverOpts {
    /// RNG seed; generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// ALS restarts per solve.
    #[arg(long, default_value_t = 3, value_parser = parse_positive)]
    restarts: usize,
    /// ALS sweep cap per restart.
    #[arg(long, default_value_t = 500, value_parser = parse_positive)]
    max_iters: usize,
    /// Stop when the relative error changes less than this between sweeps.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

impl SolverOpts {
    fn als_options(&self) -> Result<AlsOptions, CliError> {
        let opts = AlsOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            n_restarts: self.restarts,
            seed: resolve_seed(self.seed),
        };
        opts.validate().map_err(usage)?;
        Ok(opts)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// True CP rank of the generated tensor.
    #[arg(long, value_parser = parse_positive)]
    rank: usize,
    /// Tensor dimensions as I,J,K.
    #[arg(long, value_parser = parse_dims)]
    dims: (usize, usize, usize),
    #[arg(long)]
    seed: Option<u64>,
    /// Relative noise level (0 = exact low-rank tensor).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Output tensor file; the ground truth goes next to it as `.truth`.
    #[arg(long, default_value = "tensor.tns")]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Input tensor file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_positive)]
    rank: usize,
    #[command(flatten)]
    solver: SolverOpts,
    /// Factor model output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorcondiaArgs {
    /// Input tensor file.
    #[arg(long)]
    input: PathBuf,
    /// Score a previously written factor model instead of fitting one.
    #[arg(long, conflicts_with = "rank")]
    model: Option<PathBuf>,
    /// Fit a model at this rank, then score it.
    #[arg(long, value_parser = parse_positive)]
    rank: Option<usize>,
    #[command(flatten)]
    solver: SolverOpts,
}

#[derive(Args)]
struct ScanArgs {
    /// Input tensor file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    min_rank: usize,
    #[arg(long, value_parser = parse_positive)]
    max_rank: usize,
    /// Held-out cell fraction enabling the missing-value path.
    #[arg(long)]
    holdout: Option<f64>,
    #[command(flatten)]
    solver: SolverOpts,
    /// Write the scan rows (plus decisions) as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value config file (keys: ranks, trials, margin, noise,
    /// holdout, seed); flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// True ranks to test, e.g. `3..8` or `3,5,7`.
    #[arg(long, value_parser = parse_rank_set)]
    ranks: Option<RankSet>,
    #[arg(long, value_parser = parse_positive)]
    trials: Option<usize>,
    /// Extra ranks scanned above the true rank.
    #[arg(long)]
    margin: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for accuracy.csv, trials.csv, scans.csv.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::rng().random();
            println!("seed: {s} (auto-generated; pass --seed {s} to reproduce)");
            s
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Corcondia(args) => cmd_corcondia(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    if args.noise < 0.0 {
        return Err(usage("--noise must be non-negative"));
    }
    let seed = resolve_seed(args.seed);
    let (tensor, truth) = synth_kruskal(args.rank, args.dims, args.noise, seed)?;
    io::write_tensor(&tensor, &args.out)?;
    let truth_path = args.out.with_extension("truth");
    io::write_model(&truth.normalize(), &truth_path)?;
    let (i, j, k) = args.dims;
    println!(
        "wrote {i}x{j}x{k} tensor of rank {} (noise {}) to {} with ground truth {}",
        args.rank,
        args.noise,
        args.out.display(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_decompose(args: DecomposeArgs) -> Result<(), CliError> {
    let opts = args.solver.als_options()?;
    let tensor = io::read_tensor(&args.input)?;
    let (model, trace) = cp_als(&tensor, args.rank, &opts)?;
    println!(
        "rank {}: relative error {:e} after {} iterations (converged: {})",
        args.rank,
        trace.rel_errors.last().expect("nonempty trace"),
        trace.iterations,
        trace.converged
    );
    if let Some(out) = &args.out {
        io::write_model(&model, out)?;
        println!("factors written to {}", out.display());
    }
    Ok(())
}

fn cmd_corcondia(args: CorcondiaArgs) -> Result<(), CliError> {
    let tensor = io::read_tensor(&args.input)?;
    let model = match (&args.model, args.rank) {
        (Some(path), None) => io::read_model(path)?,
        (None, Some(rank)) => {
            let opts = args.solver.als_options()?;
            let (model, trace) = cp_als(&tensor, rank, &opts)?;
            println!(
                "fitted rank {rank} with relative error {:e}",
                trace.rel_errors.last().expect("nonempty trace")
            );
            model
        }
        _ => return Err(usage("pass exactly one of --model or --rank")),
    };
    let score = corcondia(&tensor, &model)?;
    println!("corcondia: {score}");
    Ok(())
}

fn print_decision(d: &RankDecision) {
    println!("{:<12} chosen_rank={}", d.method.name(), d.chosen_rank);
}

fn cmd_scan(args: ScanArgs) -> Result<(), CliError> {
    if args.min_rank > args.max_rank {
        return Err(usage("--min-rank must not exceed --max-rank"));
    }
    if let Some(f) = args.holdout {
        if !(f > 0.0 && f < 1.0) {
            return Err(usage("--holdout must lie in (0, 1)"));
        }
    }
    let opts = args.solver.als_options()?;
    let tensor = io::read_tensor(&args.input)?;
    let mask = match args.holdout {
        Some(fraction) => Some(holdout_split(
            tensor.dims(),
            fraction,
            tenrank::seed::derive_seed(opts.seed, 0x4d41534b),
        )?),
        None => None,
    };
    let rows = scan(&tensor, args.min_rank, args.max_rank, &opts, mask.as_ref())?;
    println!("rank  fit_error     corcondia    rmse_holdout  iters  converged");
    for r in &rows {
        println!(
            "{:<5} {:<13.6e} {:<12} {:<13} {:<6} {}",
            r.rank,
            r.fit_error,
            r.corcondia.map(|v| format!("{v:.4}")).unwrap_or_default(),
            r.rmse_holdout
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_default(),
            r.iterations,
            r.converged
        );
    }
    let mut decisions = Vec::new();
    for result in [autoten(&rows), autoten_rec(&rows)] {
        match result {
            Ok(d) => {
                print_decision(&d);
                decisions.push(d);
            }
            Err(e) => println!("selector failed: {e}"),
        }
    }
    if mask.is_some() {
        match autoten_mv(&rows) {
            Ok(d) => {
                print_decision(&d);
                decisions.push(d);
            }
            Err(e) => println!("selector failed: {e}"),
        }
    } else {
        println!(
            "{:<12} skipped (no holdout)",
            SelectorMethod::AutotenMv.name()
        );
    }
    match baseline1(&rows, BASELINE1_EPSILON) {
        Ok(d) => {
            print_decision(&d);
            decisions.push(d);
        }
        Err(e) => println!("selector failed: {e}"),
    }
    if let Some(csv) = &args.csv {
        io::write_scan_csv(&rows, &decisions, csv)?;
        println!("scan written to {}", csv.display());
    }
    Ok(())
}

fn read_config_file(path: &Path, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        let value = value.trim();
        let bad =
            |e: &dyn std::fmt::Display| usage(format!("{}:{}: {e}", path.display(), lineno + 1));
        match key.trim() {
            "ranks" => cfg.rank_set = parse_rank_set(value).map_err(|e| bad(&e))?.0,
            "trials" => cfg.trials_per_rank = value.parse().map_err(|e| bad(&e))?,
            "margin" => cfg.scan_margin = value.parse().map_err(|e| bad(&e))?,
            "noise" => cfg.noise_sigma = value.parse().map_err(|e| bad(&e))?,
            "holdout" => cfg.holdout_fraction = value.parse().map_err(|e| bad(&e))?,
            "seed" => cfg.master_seed = value.parse().map_err(|e| bad(&e))?,
            other => return Err(usage(format!("unknown config key `{other}`"))),
        }
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::default();
    let mut seed_given = false;
    if let Some(path) = &args.config {
        read_config_file(path, &mut cfg)?;
        seed_given = std::fs::read_to_string(path)
            .map(|s| s.lines().any(|l| l.trim_start().starts_with("seed")))
            .unwrap_or(false);
    }
    if let Some(ranks) = args.ranks {
        cfg.rank_set = ranks.0;
    }
    if let Some(trials) = args.trials {
        cfg.trials_per_rank = trials;
    }
    if let Some(margin) = args.margin {
        cfg.scan_margin = margin;
    }
    if let Some(noise) = args.noise {
        cfg.noise_sigma = noise;
    }
    if let Some(holdout) = args.holdout {
        cfg.holdout_fraction = holdout;
    }
    match args.seed {
        Some(seed) => cfg.master_seed = seed,
        None if !seed_given => {
            cfg.master_seed = rand::rng().random();
            println!(
                "seed: {} (auto-generated; pass --seed {} to reproduce)",
                cfg.master_seed, cfg.master_seed
            );
        }
        None => {}
    }
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    emit_report(&report, &args.out)?;
    if report.all_failed_count() > 0 {
        eprintln!(
            "WARNING: {} trial(s) failed on every selector and were excluded from accuracies",
            report.all_failed_count()
        );
    }
    println!("method        overall_accuracy");
    for method in SelectorMethod::ALL {
        println!(
            "{:<12}  {:.4}",
            method.name(),
            report.overall_accuracy(method)
        );
    }
    println!(
        "per-rank accuracies written to {}",
        args.out.join("accuracy.csv").display()
    );
    Ok(())
}
