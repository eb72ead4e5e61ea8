//! Benchmark orchestration: oracle construction, estimator sweeps over
//! `(seed, n, estimator)` cells, and log-log rate tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ghuot::kernel_density::{fit_density, renormalize_positive, resolution_rule};
use ghuot::kernel_estimator::fit_kernel_pair;
use ghuot::measures::{
    density_to_grid, sample_iid, sample_ppp, weighted_empirical, DiscreteMeasure, GridMeasure,
    MassEstimate, PointCloud, SyntheticDensity,
};
use ghuot::metrics::{loglog_rate_fit, map_risk, map_risk_sampled, RateFit};
use ghuot::plan_estimator::{fit_plan_pair, Extension};
use ghuot::uot::{SolverConfig, UotSolution};
use ghuot::TransportGrowthPair;
use serde::{Deserialize, Serialize};

use crate::config::{EstimatorKind, Evaluation, ExperimentConfig, MassMode};
use crate::error::{CliError, Result};

pub const ORACLE_EPS_FINAL: f64 = 1e-5;
pub const ORACLE_MAX_ITERS: usize = 20_000;

pub const CSV_COLUMNS: [&str; 9] = [
    "seed",
    "n",
    "d",
    "estimator",
    "mass_mode",
    "map_mse",
    "growth_mse",
    "status",
    "runtime_ms",
];

/// The reference pair and the source grid it was fitted on.
pub struct Oracle {
    pub pair: TransportGrowthPair,
    pub mu_grid: GridMeasure,
    pub nu_grid: GridMeasure,
    pub solution: UotSolution,
}

fn densities(config: &ExperimentConfig) -> Result<(SyntheticDensity, SyntheticDensity)> {
    Ok((
        SyntheticDensity::sine_shift(config.c_mu, config.dim)?,
        SyntheticDensity::sine_shift(config.c_nu, config.dim)?,
    ))
}

/// Solver settings used for the oracle: the configured schedule run down to
/// a finer final temperature with a larger iteration budget.
pub fn oracle_solver(config: &ExperimentConfig) -> SolverConfig {
    let base = config.solver_config();
    SolverConfig {
        eps_final: ORACLE_EPS_FINAL.min(base.eps_final),
        eps_init: base.eps_init.max(ORACLE_EPS_FINAL),
        max_iters_per_eps: base.max_iters_per_eps.max(ORACLE_MAX_ITERS),
        ..base
    }
}

pub fn compute_oracle(config: &ExperimentConfig) -> Result<Oracle> {
    compute_oracle_at(config, config.oracle_resolution())
}

/// Kernel plug-in fit on the exact cell-center discretizations of the two
/// analytic densities at resolution `resolution`.
pub fn compute_oracle_at(config: &ExperimentConfig, resolution: usize) -> Result<Oracle> {
    let (dmu, dnu) = densities(config)?;
    let mu_grid = density_to_grid(&dmu, config.mass_mu, resolution)?;
    let nu_grid = density_to_grid(&dnu, config.mass_nu, resolution)?;
    let (pair, solution) = fit_kernel_pair(
        &mu_grid,
        &nu_grid,
        &oracle_solver(config),
        &config.clip_bounds()?,
    )?;
    Ok(Oracle {
        pair,
        mu_grid,
        nu_grid,
        solution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    Failed,
}

impl CellStatus {
    pub fn id(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub estimator: EstimatorKind,
    pub mass_mode: MassMode,
    pub map_mse: Option<f64>,
    pub growth_mse: Option<f64>,
    pub status: CellStatus,
    pub runtime_ms: u128,
    /// Reason for a failed cell; reported on stderr, not in the CSV.
    pub error: Option<String>,
}

/// Stream identifiers for [`cell_seed`].
const STREAM_MU: u64 = 1;
const STREAM_NU: u64 = 2;
const STREAM_EVAL: u64 = 3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG seed for one random stream of a `(seed, n)` cell. All estimators at
/// the same `(seed, n)` see the same samples.
pub fn cell_seed(seed: u64, n: usize, stream: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ n as u64) ^ stream)
}

/// Draws `n` points from `density` with the configured mass handling.
fn draw(
    density: &SyntheticDensity,
    mass: f64,
    n: usize,
    mode: MassMode,
    seed: u64,
) -> Result<(PointCloud, MassEstimate)> {
    match mode {
        MassMode::Known => Ok((sample_iid(density, n, seed), MassEstimate::known(mass)?)),
        MassMode::Poisson => {
            // Poisson(n) points; the count estimates the mass in units of n.
            let (points, count) = sample_ppp(density, n as f64, seed)?;
            if !count.is_valid() {
                return Err(ghuot::Error::EmptySample.into());
            }
            let estimate = MassEstimate::external(mass * count.value / n as f64)?;
            Ok((points, estimate))
        }
    }
}

/// Shared inputs of one `(seed, n)` cell.
pub struct CellSamples {
    pub mu_points: PointCloud,
    pub mu_mass: MassEstimate,
    pub nu_points: PointCloud,
    pub nu_mass: MassEstimate,
}

pub fn cell_samples(config: &ExperimentConfig, seed: u64, n: usize) -> Result<CellSamples> {
    let (dmu, dnu) = densities(config)?;
    let (mu_points, mu_mass) = draw(
        &dmu,
        config.mass_mu,
        n,
        config.mass_mode,
        cell_seed(seed, n, STREAM_MU),
    )?;
    let (nu_points, nu_mass) = draw(
        &dnu,
        config.mass_nu,
        n,
        config.mass_mode,
        cell_seed(seed, n, STREAM_NU),
    )?;
    Ok(CellSamples {
        mu_points,
        mu_mass,
        nu_points,
        nu_mass,
    })
}

fn empirical(points: &PointCloud, mass: &MassEstimate) -> Result<DiscreteMeasure> {
    Ok(weighted_empirical(points.clone(), mass)?)
}

/// Fits one estimator on the cell's samples.
pub fn fit_estimator(
    config: &ExperimentConfig,
    kind: EstimatorKind,
    samples: &CellSamples,
) -> Result<TransportGrowthPair> {
    let solver = config.solver_config();
    let clip = config.clip_bounds()?;
    let pair = match kind {
        EstimatorKind::Pb1nn | EstimatorKind::PbNw => {
            let mu = empirical(&samples.mu_points, &samples.mu_mass)?;
            let nu = empirical(&samples.nu_points, &samples.nu_mass)?;
            let extension = if kind == EstimatorKind::Pb1nn {
                Extension::OneNn
            } else {
                Extension::NadarayaWatson {
                    kernel: config.nw_kernel.into(),
                    bandwidth: config.nw_bandwidth_for(mu.len()),
                }
            };
            fit_plan_pair(&mu, &nu, &solver, &clip, extension)?.0
        }
        EstimatorKind::KernelPlugin => {
            let (mu_grid, nu_grid) = kernel_grids(config, samples)?;
            fit_kernel_pair(&mu_grid, &nu_grid, &solver, &clip)?.0
        }
    };
    Ok(pair)
}

/// Positive-part kernel density estimates of both measures on the estimator
/// grid, with `L` from the anchor rule at each sample size.
pub fn kernel_grids(
    config: &ExperimentConfig,
    samples: &CellSamples,
) -> Result<(GridMeasure, GridMeasure)> {
    let a = &config.kernel_anchor;
    let r = config.grid_resolution();
    let fit = |points: &PointCloud, mass: &MassEstimate| -> Result<GridMeasure> {
        if points.is_empty() {
            return Err(ghuot::Error::EmptySample.into());
        }
        let l = resolution_rule(points.len(), config.dim, a.alpha, a.l0, a.n0)?;
        let raw = fit_density(points, l)?;
        Ok(renormalize_positive(&raw, r, mass)?)
    };
    Ok((
        fit(&samples.mu_points, &samples.mu_mass)?,
        fit(&samples.nu_points, &samples.nu_mass)?,
    ))
}

/// Held-out evaluation points for Monte Carlo risk, drawn from the source law.
fn evaluation_points(config: &ExperimentConfig, seed: u64, n: usize) -> Result<PointCloud> {
    let (dmu, _) = densities(config)?;
    Ok(sample_iid(
        &dmu,
        config.mc_points,
        cell_seed(seed, n, STREAM_EVAL),
    ))
}

pub fn evaluate_risk(
    config: &ExperimentConfig,
    oracle: &Oracle,
    pair: &TransportGrowthPair,
    seed: u64,
    n: usize,
) -> Result<(f64, f64)> {
    Ok(match config.evaluation {
        Evaluation::Grid => map_risk(pair, &oracle.pair, &oracle.mu_grid)?,
        Evaluation::MonteCarlo => {
            let points = evaluation_points(config, seed, n)?;
            map_risk_sampled(pair, &oracle.pair, &points, config.mass_mu)?
        }
    })
}

/// Runs every cell in `(seed, n, estimator)` order against a precomputed oracle.
/// Failed cells become rows with `status = failed`.
pub fn run_cells(config: &ExperimentConfig, oracle: &Oracle) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let mut estimators = config.estimators.clone();
    estimators.sort_unstable();
    estimators.dedup();
    let mut seeds = config.seed_list();
    seeds.sort_unstable();

    let mut rows = Vec::with_capacity(seeds.len() * config.n_list.len() * estimators.len());
    for &seed in &seeds {
        for &n in &config.n_list {
            let samples = cell_samples(config, seed, n);
            for &kind in &estimators {
                let start = Instant::now();
                let outcome = samples.as_ref().map_err(|e| e.to_string()).and_then(|s| {
                    fit_estimator(config, kind, s)
                        .and_then(|pair| evaluate_risk(config, oracle, &pair, seed, n))
                        .map_err(|e| e.to_string())
                });
                let runtime_ms = start.elapsed().as_millis();
                let (map_mse, growth_mse, status, error) = match outcome {
                    Ok((m, g)) => (Some(m), Some(g), CellStatus::Ok, None),
                    Err(e) => (None, None, CellStatus::Failed, Some(e)),
                };
                rows.push(BenchRow {
                    seed,
                    n,
                    d: config.dim,
                    estimator: kind,
                    mass_mode: config.mass_mode,
                    map_mse,
                    growth_mse,
                    status,
                    runtime_ms,
                    error,
                });
            }
        }
    }
    Ok(rows)
}

pub fn csv_header(config: &ExperimentConfig, created_unix: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tool: ghuot {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# config_sha256: {}", config.hash());
    let _ = writeln!(s, "# created_unix: {created_unix}");
    let evaluation = match config.evaluation {
        Evaluation::Grid => format!(
            "grid quadrature against analytic mu at resolution {}",
            config.oracle_resolution()
        ),
        Evaluation::MonteCarlo => format!("{} held-out draws from analytic mu", config.mc_points),
    };
    let _ = writeln!(s, "# evaluation: {evaluation}");
    let _ = writeln!(
        s,
        "# oracle: kernel plug-in on analytic grids, resolution {}, eps_final {}",
        config.oracle_resolution(),
        oracle_solver(config).eps_final
    );
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rows<W: std::io::Write>(writer: W, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.n.to_string(),
            r.d.to_string(),
            r.estimator.id().to_string(),
            r.mass_mode.id().to_string(),
            fmt_opt(r.map_mse),
            fmt_opt(r.growth_mse),
            r.status.id().to_string(),
            r.runtime_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full benchmark: oracle, sweep, CSV with a `#` metadata header.
pub fn run_benchmark(config: &ExperimentConfig, out_path: &Path) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let oracle = compute_oracle(config)?;
    let rows = run_cells(config, &oracle)?;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = csv_header(config, created).into_bytes();
    write_rows(&mut out, &rows).map_err(|e| CliError::format(out_path, e))?;
    std::fs::write(out_path, out).map_err(|e| CliError::io(out_path, e))?;
    Ok(rows)
}

#[derive(Debug, Clone, Deserialize)]
struct CsvRecord {
    n: usize,
    estimator: String,
    map_mse: Option<f64>,
    growth_mse: Option<f64>,
    status: String,
}

/// Seed-averaged risks of one estimator at one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub map_mse: f64,
    pub growth_mse: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub estimator: String,
    pub points: Vec<RatePoint>,
    pub map: std::result::Result<RateFit, ghuot::Error>,
    pub growth: std::result::Result<RateFit, ghuot::Error>,
}

pub fn read_bench_csv(path: &Path) -> Result<Vec<(usize, String, f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_bench_csv(&text).map_err(|m| CliError::format(path, m))
}

/// `(n, estimator, map_mse, growth_mse)` of every successful row.
pub fn parse_bench_csv(text: &str) -> std::result::Result<Vec<(usize, String, f64, f64)>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.deserialize::<CsvRecord>() {
        let r = record.map_err(|e| e.to_string())?;
        if r.status != CellStatus::Ok.id() {
            continue;
        }
        match (r.map_mse, r.growth_mse) {
            (Some(m), Some(g)) => out.push((r.n, r.estimator, m, g)),
            _ => return Err(format!("row with n = {} has status ok but no risks", r.n)),
        }
    }
    Ok(out)
}

/// Averages over seeds per `(estimator, n)` and fits log-log slopes; one row
/// per estimator in name order.
pub fn report_rates(records: &[(usize, String, f64, f64)]) -> Vec<RateRow> {
    let mut groups: BTreeMap<&str, BTreeMap<usize, Vec<(f64, f64)>>> = BTreeMap::new();
    for (n, est, m, g) in records {
        groups
            .entry(est.as_str())
            .or_default()
            .entry(*n)
            .or_default()
            .push((*m, *g));
    }
    groups
        .into_iter()
        .map(|(est, by_n)| {
            let points: Vec<RatePoint> = by_n
                .into_iter()
                .map(|(n, v)| {
                    let k = v.len() as f64;
                    RatePoint {
                        n,
                        map_mse: v.iter().map(|p| p.0).sum::<f64>() / k,
                        growth_mse: v.iter().map(|p| p.1).sum::<f64>() / k,
                        seeds: v.len(),
                    }
                })
                .collect();
            let map: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.map_mse)).collect();
            let growth: Vec<(f64, f64)> =
                points.iter().map(|p| (p.n as f64, p.growth_mse)).collect();
            RateRow {
                estimator: est.to_string(),
                map: loglog_rate_fit(&map),
                growth: loglog_rate_fit(&growth),
                points,
            }
        })
        .collect()
}

pub fn format_rate_table(rows: &[RateRow]) -> String {
    let mut s = String::from("estimator,target,slope,intercept,stderr\n");
    for r in rows {
        for (target, fit) in [("map", &r.map), ("growth", &r.growth)] {
            let _ = match fit {
                Ok(f) => writeln!(
                    s,
                    "{},{target},{},{},{}",
                    r.estimator, f.slope, f.intercept, f.stderr
                ),
                Err(e) => writeln!(s, "{},{target},,,# {e}", r.estimator),
            };
        }
    }
    s
}
