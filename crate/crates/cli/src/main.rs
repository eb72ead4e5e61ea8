use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ghuot::kernel_density::{fit_density, renormalize_positive, resolution_rule};
use ghuot::kernel_estimator::fit_kernel_pair;
use ghuot::measures::{DiscreteMeasure, MassEstimate, PointCloud};
use ghuot::plan_estimator::{fit_plan_pair, ClipBounds, Extension, NwKernel};
use ghuot::uot::{solve_discrete_uot, SolverConfig};
use ghuot::{evaluate_pair, TransportGrowthPair};
use ghuot_cli::config::ExperimentConfig;
use ghuot_cli::error::{CliError, Result};
use ghuot_cli::{formats, harness};

#[derive(Parser)]
#[command(
    name = "ghuot",
    version,
    about = "Unbalanced OT transport-growth estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the discrete problem between two sample files.
    Solve(SolveArgs),
    /// Kernel density estimate of a sample, written as a grid measure.
    Density(DensityArgs),
    /// Fit a transport-growth pair and evaluate it at query points.
    Estimate(EstimateArgs),
    /// Compute the reference pair of an experiment config.
    Oracle(OracleArgs),
    /// Run the estimator sweep of an experiment config.
    Bench(BenchArgs),
    /// Fit log-log rates to a benchmark CSV.
    Rates(RatesArgs),
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    eps_init: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps_final: f64,
    #[arg(long, default_value_t = 0.5)]
    eps_decay: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            eps_init: self.eps_init,
            eps_final: self.eps_final,
            eps_decay: self.eps_decay,
            max_iters_per_eps: self.max_iters,
            fixed_point_tol: self.tol,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Source samples (CSV; mass from the weight column or the JSON sidecar).
    #[arg(long)]
    mu: PathBuf,
    /// Target samples.
    #[arg(long)]
    nu: PathBuf,
    /// Directory for plan.csv, plan.json, phi.csv and psi.csv.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Kernel resolution L. When absent it follows the anchor rule.
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, default_value_t = ghuot_cli::config::DEFAULT_L0)]
    l0: f64,
    #[arg(long, default_value_t = 1000)]
    n0: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    #[value(name = "pb_1nn")]
    Pb1nn,
    #[value(name = "pb_nw")]
    PbNw,
    #[value(name = "kernel_plugin")]
    KernelPlugin,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Epanechnikov,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    mu: PathBuf,
    #[arg(long)]
    nu: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Query points (CSV x0..); defaults to the source sample.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    bandwidth: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    nw_kernel: KernelArg,
    /// Kernel resolution L for kernel_plugin; defaults to the anchor rule.
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    #[arg(long, default_value_t = 1e-3)]
    w_minus: f64,
    #[arg(long, default_value_t = 1e3)]
    w_plus: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct OracleArgs {
    /// Experiment config JSON; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for oracle_potentials.csv/.json and oracle_pair.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    /// Benchmark CSV produced by `bench`.
    #[arg(long)]
    input: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn anchor_l(n: usize, d: usize, l: Option<f64>, l0: f64, n0: usize, alpha: f64) -> Result<f64> {
    match l {
        Some(l) => Ok(l),
        None => Ok(resolution_rule(n, d, alpha, l0, n0)?),
    }
}

fn kernel_grid(
    measure: &DiscreteMeasure,
    l: Option<f64>,
    resolution: usize,
) -> Result<ghuot::measures::GridMeasure> {
    let l = anchor_l(
        measure.len(),
        measure.dim(),
        l,
        ghuot_cli::config::DEFAULT_L0,
        1000,
        2.0,
    )?;
    let raw = fit_density(measure.points(), l)?;
    let mass = MassEstimate::external(measure.total_mass())?;
    Ok(renormalize_positive(&raw, resolution, &mass)?)
}

fn solve(args: SolveArgs) -> Result<()> {
    let mu = formats::read_samples(&args.mu, None)?;
    let nu = formats::read_samples(&args.nu, None)?;
    let solution = solve_discrete_uot(&mu, &nu, &args.solver.config())?;
    ensure_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    formats::write_plan(&dir.join("plan.csv"), &dir.join("plan.json"), &solution)?;
    formats::write_potentials(
        &dir.join("phi.csv"),
        &dir.join("psi.csv"),
        &solution.potentials,
    )?;
    println!(
        "value {} dual {} gap {} eps_final {}",
        solution.primal_value,
        solution.dual_value,
        solution.primal_value - solution.dual_value,
        solution.eps_final
    );
    Ok(())
}

fn density(args: DensityArgs) -> Result<()> {
    let measure = formats::read_samples(&args.samples, None)?;
    let l = anchor_l(
        measure.len(),
        measure.dim(),
        args.l,
        args.l0,
        args.n0,
        args.alpha,
    )?;
    let raw = fit_density(measure.points(), l)?;
    let mass = MassEstimate::external(measure.total_mass())?;
    let grid = renormalize_positive(&raw, args.resolution, &mass)?;
    formats::write_grid(&args.out, &grid)
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let mu = formats::read_samples(&args.mu, None)?;
    let nu = formats::read_samples(&args.nu, None)?;
    let solver = args.solver.config();
    let clip = ClipBounds::new(args.w_minus, args.w_plus)?;
    let pair: TransportGrowthPair = match args.method {
        Method::Pb1nn => fit_plan_pair(&mu, &nu, &solver, &clip, Extension::OneNn)?.0,
        Method::PbNw => {
            let kernel = match args.nw_kernel {
                KernelArg::Gaussian => NwKernel::Gaussian,
                KernelArg::Epanechnikov => NwKernel::Epanechnikov,
            };
            let ext = Extension::NadarayaWatson {
                kernel,
                bandwidth: args.bandwidth,
            };
            fit_plan_pair(&mu, &nu, &solver, &clip, ext)?.0
        }
        Method::KernelPlugin => {
            let mu_grid = kernel_grid(&mu, args.l, args.resolution)?;
            let nu_grid = kernel_grid(&nu, args.l, args.resolution)?;
            fit_kernel_pair(&mu_grid, &nu_grid, &solver, &clip)?.0
        }
    };
    let queries: PointCloud = match &args.queries {
        Some(q) => formats::read_sample_table(q)?.points,
        None => mu.points().clone(),
    };
    let values = evaluate_pair(&pair, &queries);
    formats::write_pair_table(&args.out, &queries, &values)
}

fn oracle(args: OracleArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let oracle = harness::compute_oracle(&config)?;
    ensure_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    if let TransportGrowthPair::Grid(pot) = &oracle.pair {
        formats::write_grid_potentials(
            &dir.join("oracle_potentials.csv"),
            &dir.join("oracle_potentials.json"),
            pot,
        )?;
    }
    let centers = oracle.mu_grid.centers();
    let values = evaluate_pair(&oracle.pair, &centers);
    formats::write_pair_table(&dir.join("oracle_pair.csv"), &centers, &values)?;
    println!(
        "oracle resolution {} value {} gap {}",
        oracle.mu_grid.resolution(),
        oracle.solution.primal_value,
        oracle.solution.primal_value - oracle.solution.dual_value
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let rows = harness::run_benchmark(&config, &args.out)?;
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "seed {} n {} {}: {}",
            r.seed,
            r.n,
            r.estimator.id(),
            r.error.as_deref().unwrap_or_default()
        );
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} rows, {} failed, written to {}",
        rows.len(),
        failed,
        args.out.display()
    );
    Ok(())
}

fn rates(args: RatesArgs) -> Result<()> {
    let records = harness::read_bench_csv(&args.input)?;
    let table = harness::format_rate_table(&harness::report_rates(&records));
    match &args.out {
        Some(path) => std::fs::write(path, table).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Density(a) => density(a),
        Command::Estimate(a) => estimate(a),
        Command::Oracle(a) => oracle(a),
        Command::Bench(a) => bench(a),
        Command::Rates(a) => rates(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
