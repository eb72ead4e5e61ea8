//! Experiment configuration. Every field is optional in the JSON file; missing
//! fields take the simulation defaults.

use std::path::Path;

use ghuot::plan_estimator::{ClipBounds, NwKernel};
use ghuot::uot::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "pb_1nn")]
    Pb1nn,
    #[serde(rename = "pb_nw")]
    PbNw,
    #[serde(rename = "kernel_plugin")]
    KernelPlugin,
}

impl EstimatorKind {
    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::Pb1nn => "pb_1nn",
            EstimatorKind::PbNw => "pb_nw",
            EstimatorKind::KernelPlugin => "kernel_plugin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Pb1nn, Self::PbNw, Self::KernelPlugin]
            .into_iter()
            .find(|k| k.id() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMode {
    /// Atoms weighted by the true mass.
    Known,
    /// Poisson sample count; the mass is estimated from the realized count.
    Poisson,
}

impl MassMode {
    pub fn id(self) -> &'static str {
        match self {
            MassMode::Known => "known",
            MassMode::Poisson => "poisson",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// Midpoint quadrature against the analytic source density on the oracle grid.
    Grid,
    /// Average over held-out draws from the source law.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NwKernelName {
    Gaussian,
    Epanechnikov,
}

impl From<NwKernelName> for NwKernel {
    fn from(k: NwKernelName) -> Self {
        match k {
            NwKernelName::Gaussian => NwKernel::Gaussian,
            NwKernelName::Epanechnikov => NwKernel::Epanechnikov,
        }
    }
}

/// A seed count (`10` means seeds `0..10`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub eps_init: f64,
    pub eps_final: f64,
    pub eps_decay: f64,
    pub max_iters_per_eps: usize,
    pub fixed_point_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverConfig::default().into()
    }
}

impl From<SolverConfig> for SolverSettings {
    fn from(c: SolverConfig) -> Self {
        Self {
            eps_init: c.eps_init,
            eps_final: c.eps_final,
            eps_decay: c.eps_decay,
            max_iters_per_eps: c.max_iters_per_eps,
            fixed_point_tol: c.fixed_point_tol,
        }
    }
}

impl From<SolverSettings> for SolverConfig {
    fn from(s: SolverSettings) -> Self {
        SolverConfig {
            eps_init: s.eps_init,
            eps_final: s.eps_final,
            eps_decay: s.eps_decay,
            max_iters_per_eps: s.max_iters_per_eps,
            fixed_point_tol: s.fixed_point_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipSettings {
    pub w_minus: f64,
    pub w_plus: f64,
}

impl Default for ClipSettings {
    fn default() -> Self {
        let c = ClipBounds::default();
        Self {
            w_minus: c.w_minus(),
            w_plus: c.w_plus(),
        }
    }
}

/// Anchor of the kernel resolution rule `L = l0 * (n / n0)^(1 / (d + 2(alpha - 1)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelAnchor {
    pub l0: f64,
    pub n0: usize,
    pub alpha: f64,
}

/// Anchor resolution at `n0 = 1000`, chosen once on the default d = 1 sine
/// benchmark and then frozen.
pub const DEFAULT_L0: f64 = 16.0;

impl Default for KernelAnchor {
    fn default() -> Self {
        Self {
            l0: DEFAULT_L0,
            n0: 1000,
            alpha: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub n_list: Vec<usize>,
    pub seeds: Seeds,
    pub mass_mu: f64,
    pub mass_nu: f64,
    pub c_mu: f64,
    pub c_nu: f64,
    pub estimators: Vec<EstimatorKind>,
    pub solver: SolverSettings,
    pub clip: ClipSettings,
    pub kernel_anchor: KernelAnchor,
    /// Kernel estimator grid; defaults by dimension when absent.
    pub grid_resolution: Option<usize>,
    /// Oracle grid; defaults to 512 in d = 1 and twice the estimator grid otherwise.
    pub oracle_resolution: Option<usize>,
    pub mass_mode: MassMode,
    /// Fixed Nadaraya-Watson bandwidth; when absent `0.3 * n^(-1/(d+4))`.
    pub nw_bandwidth: Option<f64>,
    pub nw_kernel: NwKernelName,
    pub evaluation: Evaluation,
    /// Held-out points for Monte Carlo evaluation.
    pub mc_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n_list: vec![100, 200, 500, 1000],
            seeds: Seeds::Count(10),
            mass_mu: 1.0,
            mass_nu: 2.5,
            c_mu: 0.3,
            c_nu: 0.7,
            estimators: vec![
                EstimatorKind::Pb1nn,
                EstimatorKind::PbNw,
                EstimatorKind::KernelPlugin,
            ],
            solver: SolverSettings::default(),
            clip: ClipSettings::default(),
            kernel_anchor: KernelAnchor::default(),
            grid_resolution: None,
            oracle_resolution: None,
            mass_mode: MassMode::Known,
            nw_bandwidth: None,
            nw_kernel: NwKernelName::Gaussian,
            evaluation: Evaluation::Grid,
            mc_points: 4096,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| invalid(format!("cannot parse config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn grid_resolution(&self) -> usize {
        self.grid_resolution.unwrap_or(match self.dim {
            1 => 128,
            2 => 32,
            _ => 8,
        })
    }

    pub fn oracle_resolution(&self) -> usize {
        self.oracle_resolution.unwrap_or(match self.dim {
            1 => 512.max(2 * self.grid_resolution()),
            _ => 2 * self.grid_resolution(),
        })
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.to_vec()
    }

    pub fn solver_config(&self) -> SolverConfig {
        self.solver.into()
    }

    pub fn clip_bounds(&self) -> Result<ClipBounds> {
        ClipBounds::new(self.clip.w_minus, self.clip.w_plus)
            .map_err(|_| invalid("clip: need 0 < w_minus < w_plus"))
    }

    pub fn nw_bandwidth_for(&self, n: usize) -> f64 {
        self.nw_bandwidth
            .unwrap_or_else(|| 0.3 * (n.max(1) as f64).powf(-1.0 / (self.dim as f64 + 4.0)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        if self.n_list.is_empty() {
            return Err(invalid("n_list must be nonempty"));
        }
        if self.n_list.contains(&0) || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_list must be positive and strictly ascending"));
        }
        let seeds = self.seed_list();
        if seeds.is_empty() {
            return Err(invalid("seeds must be nonempty"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        for (name, m) in [("mass_mu", self.mass_mu), ("mass_nu", self.mass_nu)] {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        for (name, c) in [("c_mu", self.c_mu), ("c_nu", self.c_nu)] {
            if !(0.0..=1.0).contains(&c) {
                return Err(invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.estimators.is_empty() {
            return Err(invalid("estimators must be nonempty"));
        }
        self.solver_config()
            .validate()
            .map_err(|e| invalid(format!("solver: {e}")))?;
        self.clip_bounds()?;
        let a = &self.kernel_anchor;
        if !(a.l0 > 0.0 && a.n0 > 0 && a.alpha > 1.0) {
            return Err(invalid("kernel_anchor: need l0 > 0, n0 > 0, alpha > 1"));
        }
        let r = self.grid_resolution();
        if r < 2 {
            return Err(invalid("grid_resolution must be at least 2"));
        }
        if self.oracle_resolution() < 2 * r {
            return Err(invalid(
                "oracle_resolution must be at least twice grid_resolution",
            ));
        }
        if let Some(h) = self.nw_bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("nw_bandwidth must be positive"));
            }
        }
        if self.evaluation == Evaluation::MonteCarlo && self.mc_points == 0 {
            return Err(invalid("mc_points must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the fully resolved configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut resolved = self.clone();
        resolved.grid_resolution = Some(self.grid_resolution());
        resolved.oracle_resolution = Some(self.oracle_resolution());
        resolved.seeds = Seeds::List(self.seed_list());
        let json = serde_json::to_string(&resolved).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
