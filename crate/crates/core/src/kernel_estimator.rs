//! Plug-in estimator built from the dual potentials of the problem between two
//! grid measures.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::measures::grid::{cell_of, grid_centers};
use crate::measures::{GridMeasure, PointCloud};
use crate::pair::{TransportGrowth, TransportGrowthPair};
use crate::plan_estimator::ClipBounds;
use crate::uot::{c_transform, solve_discrete_uot, CostMatrix, Side, SolverConfig, UotSolution};

/// Dual potentials at every cell center of a shared `R^d` grid.
///
/// `T(x)` minimizes `|x - y_c|^2 / 2 - psi_c` over cell centers (lowest flat
/// index on ties); `a(x)^2 = e^{-phi}` at the cell containing `x`; and
/// `lambda(x) = clip(a^2) exp(|x - T(x)|^2 / 4)`.
#[derive(Debug, Clone)]
pub struct GridPotentials {
    dim: usize,
    resolution: usize,
    centers: PointCloud,
    phi: Vec<f64>,
    psi: Vec<f64>,
    clip: ClipBounds,
}

impl GridPotentials {
    pub fn new(
        dim: usize,
        resolution: usize,
        phi: Vec<f64>,
        psi: Vec<f64>,
        clip: ClipBounds,
    ) -> Result<Self> {
        if dim == 0 || resolution < 2 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "need dim >= 1 and resolution >= 2",
            });
        }
        let centers = grid_centers(dim, resolution);
        for v in [&phi, &psi] {
            if v.len() != centers.len() {
                return Err(Error::DimensionMismatch {
                    expected: centers.len(),
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            dim,
            resolution,
            centers,
            phi,
            psi,
            clip,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn centers(&self) -> &PointCloud {
        &self.centers
    }

    pub fn clip(&self) -> &ClipBounds {
        &self.clip
    }

    /// `(phi + c, psi - c)`
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.phi.iter_mut().for_each(|p| *p += c);
        out.psi.iter_mut().for_each(|q| *q -= c);
        out
    }

    /// Flat index of the cell center minimizing `|x - y|^2 / 2 - psi(y)`.
    pub fn argmin_index(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_v = f64::INFINITY;
        for (k, (y, q)) in self.centers.iter().zip(&self.psi).enumerate() {
            let v = 0.5 * math::squared_distance(x, y) - q;
            if v < best_v {
                best_v = v;
                best = k;
            }
        }
        best
    }

    /// `max (phi_a + psi_b - |x_a - y_b|^2 / 2)` over the given cell pairs.
    pub fn max_violation(&self, pairs: impl Iterator<Item = (usize, usize)>) -> f64 {
        pairs
            .map(|(a, b)| {
                self.phi[a] + self.psi[b]
                    - 0.5 * math::squared_distance(self.centers.point(a), self.centers.point(b))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TransportGrowth for GridPotentials {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate_into(&self, x: &[f64], target: &mut [f64]) -> (f64, f64) {
        let k = self.argmin_index(x);
        target.copy_from_slice(self.centers.point(k));
        let a2 = math::exp(-self.phi[cell_of(self.dim, self.resolution, x)]);
        (self.clip.growth(a2, x, target), math::sqrt(a2))
    }
}

/// Solves the problem between the cell-center discretizations of two grid
/// measures and wraps the tightened potentials as a transport-growth pair.
///
/// Cells with zero density are left out of the solve. Their potentials are
/// filled in by c-transform (`psi = phi^c`, then `phi = psi^c`), which leaves
/// the solved values unchanged and keeps the pair feasible on every
/// cell-center pair.
pub fn fit_kernel_pair(
    mu_grid: &GridMeasure,
    nu_grid: &GridMeasure,
    solver: &SolverConfig,
    clip: &ClipBounds,
) -> Result<(TransportGrowthPair, UotSolution)> {
    if !mu_grid.same_layout(nu_grid) {
        return Err(Error::DimensionMismatch {
            expected: mu_grid.len(),
            found: nu_grid.len(),
        });
    }
    let (mu, _) = mu_grid.to_discrete()?;
    let (nu, _) = nu_grid.to_discrete()?;
    let solution = solve_discrete_uot(&mu, &nu, solver)?;

    let centers = mu_grid.centers();
    let to_all = CostMatrix::between(mu.points(), &centers)?;
    let psi_full = c_transform(&solution.potentials.phi, &to_all, Side::Rows);
    let all_to_all = CostMatrix::between(&centers, &centers)?;
    let phi_full = c_transform(&psi_full, &all_to_all, Side::Cols);

    let pair = GridPotentials::new(
        mu_grid.dim(),
        mu_grid.resolution(),
        phi_full,
        psi_full,
        *clip,
    )?;
    Ok((TransportGrowthPair::Grid(pair), solution))
}
