//! Command-line front end: instance generation, single solves, benchmark
//! sweeps and performance profiles.

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fastbcd::bench::{self, ExperimentSpec};
use fastbcd::driver::{self, BlockBudget, OrderingMeasure, SolverConfig};
use fastbcd::problem::{self, GeneratorKind};
use fastbcd::Error;

#[derive(Parser)]
#[command(
    name = "fastbcd",
    version,
    about = "Active-set block coordinate descent for l1-regularized least squares"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance and save it in the binary instance format.
    Generate(GenerateArgs),
    /// Solve a saved instance.
    Solve(SolveArgs),
    /// Run a benchmark sweep and write results and profile CSVs.
    Bench(BenchArgs),
    /// Build a performance profile from a results CSV.
    Profile(ProfileArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: GeneratorKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    rho: f64,
    /// Nonzero probability for P2 matrices.
    #[arg(long, default_value_t = problem::DEFAULT_DENSITY)]
    density: f64,
    #[arg(long, default_value_t = problem::DEFAULT_NOISE_VAR)]
    noise_var: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Phi,
    FirstOrder,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Block size (1 or 2).
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Active-set estimate parameter; defaults to the preset for `r`.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    adaptive_eps: bool,
    #[arg(long)]
    enhanced: bool,
    #[arg(long, value_enum, default_value = "phi")]
    measure: Measure,
    /// Blocks per iteration; defaults to a fraction of the non-active set.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_outer: usize,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Full,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON experiment spec; overrides --preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ratio assigned to failed runs.
    #[arg(long)]
    penalty: Option<f64>,
}

fn parse_kind(s: &str) -> Result<GeneratorKind, String> {
    match s.parse::<GeneratorKind>() {
        Ok(GeneratorKind::Custom) | Err(_) => Err(format!("expected P1 or P2, got '{s}'")),
        Ok(k) => Ok(k),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) => 1,
        e if e.is_io() => 3,
        _ => 2,
    }
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let inst = problem::generate_instance(
        args.kind,
        args.n,
        args.m,
        args.rho,
        args.density,
        args.noise_var,
        args.seed,
    )?;
    problem::save_instance(&inst, &args.out)?;
    println!(
        "wrote {} (m={}, n={}, tau={:e}, spikes={})",
        args.out.display(),
        inst.m(),
        inst.n(),
        inst.tau(),
        inst.true_support_size().unwrap_or(0)
    );
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let mut cfg = match args.r {
        1 => SolverConfig::fast1(),
        2 => SolverConfig::fast2(),
        r => return Err(Error::InvalidParameter(format!("block size must be 1 or 2, got {r}"))),
    };
    if let Some(eps) = args.eps {
        cfg.estimate.epsilon = eps;
    }
    if let Some(s) = args.blocks {
        cfg.budget = BlockBudget::Fixed(s);
    }
    cfg.adaptive_eps = args.adaptive_eps;
    cfg.enhanced = args.enhanced;
    cfg.measure = match args.measure {
        Measure::Phi => OrderingMeasure::Phi,
        Measure::FirstOrder => OrderingMeasure::FirstOrder,
    };
    cfg.tol = args.tol;
    cfg.max_outer = args.max_outer;

    let inst = problem::load_instance(&args.instance)?;
    let (sol, trace) = match driver::solve(&inst, &cfg) {
        Ok(out) => out,
        Err(fail) => {
            if let Some(path) = &args.trace_out {
                fail.trace.save_csv(path)?;
            }
            return Err(fail.error);
        }
    };
    if let Some(path) = &args.trace_out {
        trace.save_csv(path)?;
    }
    let nnz = sol.x.iter().filter(|v| **v != 0.0).count();
    println!(
        "status={:?} iterations={} f={:.16e} kkt={:e} nnz={}",
        sol.status, sol.iterations, sol.f, sol.kkt_violation, nnz
    );
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), Error> {
    let spec = match &args.spec {
        Some(path) => ExperimentSpec::load(path)?,
        None => match args.preset {
            Preset::Desk => ExperimentSpec::desk(),
            Preset::Full => ExperimentSpec::full(),
        },
    };
    let path = bench::run_experiment(&spec, &args.out_dir, args.workers)?;
    let rows = bench::read_results_csv(File::open(&path)?)?;
    let failures = rows.iter().filter(|r| !r.reached).count();
    println!("wrote {} ({} runs, {} failures)", path.display(), rows.len(), failures);
    Ok(())
}

fn profile(args: ProfileArgs) -> Result<(), Error> {
    let rows = bench::read_results_csv(File::open(&args.results)?)?;
    let curves = bench::performance_profile(&rows, args.penalty)?;
    bench::write_profile_csv(&curves, File::create(&args.out)?)?;
    for c in &curves {
        println!("{}: solved {:.3}", c.solver, c.fractions.last().copied().unwrap_or(0.0));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Profile(a) => profile(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
