//! Plan-based estimator: barycentric projection of each plan row, clipped
//! growth factors, and their extension to the whole cube by nearest
//! neighbours or Nadaraya-Watson smoothing.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::measures::{DiscreteMeasure, PointCloud};
use crate::pair::{TransportGrowth, TransportGrowthPair};
use crate::uot::{solve_discrete_uot, SolverConfig, TransportPlan, UotSolution};

/// Clipping interval `[w_minus, w_plus]` for squared active factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipBounds {
    w_minus: f64,
    w_plus: f64,
}

impl Default for ClipBounds {
    fn default() -> Self {
        Self {
            w_minus: 1e-3,
            w_plus: 1e3,
        }
    }
}

impl ClipBounds {
    pub fn new(w_minus: f64, w_plus: f64) -> Result<Self> {
        if !(w_minus > 0.0 && w_minus < w_plus && w_plus.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "clip",
                reason: "need 0 < w_minus < w_plus",
            });
        }
        Ok(Self { w_minus, w_plus })
    }

    pub fn w_minus(&self) -> f64 {
        self.w_minus
    }

    pub fn w_plus(&self) -> f64 {
        self.w_plus
    }

    #[inline]
    pub fn clip(&self, w: f64) -> f64 {
        w.clamp(self.w_minus, self.w_plus)
    }

    /// `clip(a^2) * exp(|x - t|^2 / 4)`
    #[inline]
    pub fn growth(&self, a_squared: f64, x: &[f64], t: &[f64]) -> f64 {
        self.clip(a_squared) * math::exp(0.25 * math::squared_distance(x, t))
    }
}

/// Per-sample estimates at the source atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct RowEstimates {
    pub t_hat: PointCloud,
    pub r_hat: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
}

impl RowEstimates {
    pub fn len(&self) -> usize {
        self.r_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_hat.is_empty()
    }
}

/// Row masses `r_i` and barycentric targets `T_i = sum_j gamma_ij Y_j / r_i`;
/// an empty row maps to its own source point.
pub fn barycentric_rows(
    plan: &TransportPlan,
    sources: &PointCloud,
    targets: &PointCloud,
) -> Result<(PointCloud, Vec<f64>)> {
    if plan.rows() != sources.len() || plan.cols() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: plan.rows(),
            found: sources.len(),
        });
    }
    if sources.dim() != targets.dim() {
        return Err(Error::DimensionMismatch {
            expected: sources.dim(),
            found: targets.dim(),
        });
    }
    let d = sources.dim();
    let r_hat = plan.row_marginals().to_vec();
    let mut coords = Vec::with_capacity(plan.rows() * d);
    let mut acc = alloc::vec![0.0; d];
    for (i, &r) in r_hat.iter().enumerate() {
        if r > 0.0 {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (g, y) in plan.row(i).iter().zip(targets.iter()) {
                if *g != 0.0 {
                    for (a, yk) in acc.iter_mut().zip(y) {
                        *a += g * yk;
                    }
                }
            }
            // a convex combination of points in the cube; rounding may step
            // just outside
            coords.extend(acc.iter().map(|a| (a / r).clamp(0.0, 1.0)));
        } else {
            coords.extend_from_slice(sources.point(i));
        }
    }
    Ok((PointCloud::from_raw(d, coords), r_hat))
}

/// `a_i = sqrt(r_i / mu_i)` and `lambda_i = clip(a_i^2) exp(|X_i - T_i|^2 / 4)`.
pub fn growth_from_rows(
    r_hat: &[f64],
    mu_weights: &[f64],
    t_hat: &PointCloud,
    sources: &PointCloud,
    clip: &ClipBounds,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = r_hat.len();
    if mu_weights.len() != n || t_hat.len() != n || sources.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu_weights.len(),
        });
    }
    let mut a_hat = Vec::with_capacity(n);
    let mut lambda_hat = Vec::with_capacity(n);
    for i in 0..n {
        let w = mu_weights[i];
        if !(w > 0.0) {
            return Err(Error::NonPositiveWeight { index: i, value: w });
        }
        let a2 = r_hat[i] / w;
        a_hat.push(math::sqrt(a2));
        lambda_hat.push(clip.growth(a2, sources.point(i), t_hat.point(i)));
    }
    Ok((a_hat, lambda_hat))
}

pub fn row_estimates(
    plan: &TransportPlan,
    mu: &DiscreteMeasure,
    targets: &PointCloud,
    clip: &ClipBounds,
) -> Result<RowEstimates> {
    let (t_hat, r_hat) = barycentric_rows(plan, mu.points(), targets)?;
    let (a_hat, lambda_hat) = growth_from_rows(&r_hat, mu.weights(), &t_hat, mu.points(), clip)?;
    Ok(RowEstimates {
        t_hat,
        r_hat,
        a_hat,
        lambda_hat,
    })
}

/// Index of the nearest point under Euclidean distance, lowest index on ties.
pub fn nearest_index(points: &PointCloud, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = math::squared_distance(p, x);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Piecewise-constant extension over the Voronoi cells of the sources.
/// Cells are never built; each query scans all sources.
#[derive(Debug, Clone)]
pub struct NearestNeighborPair {
    sources: PointCloud,
    rows: RowEstimates,
}

impl NearestNeighborPair {
    pub fn rows(&self) -> &RowEstimates {
        &self.rows
    }

    pub fn sources(&self) -> &PointCloud {
        &self.sources
    }
}

impl TransportGrowth for NearestNeighborPair {
    fn dim(&self) -> usize {
        self.sources.dim()
    }

    fn evaluate_into(&self, x: &[f64], target: &mut [f64]) -> (f64, f64) {
        let i = nearest_index(&self.sources, x);
        target.copy_from_slice(self.rows.t_hat.point(i));
        (self.rows.lambda_hat[i], self.rows.a_hat[i])
    }
}

pub fn extend_1nn(rows: RowEstimates, sources: PointCloud) -> Result<TransportGrowthPair> {
    check_rows(&rows, &sources)?;
    Ok(TransportGrowthPair::OneNn(NearestNeighborPair {
        sources,
        rows,
    }))
}

fn check_rows(rows: &RowEstimates, sources: &PointCloud) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::EmptySample);
    }
    if rows.len() != sources.len() || rows.t_hat.dim() != sources.dim() {
        return Err(Error::DimensionMismatch {
            expected: sources.len(),
            found: rows.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NwKernel {
    /// `exp(-|u|^2 / 2)`
    Gaussian,
    /// `max(0, 1 - |u|^2)`
    Epanechnikov,
}

impl NwKernel {
    /// Log of the unnormalized kernel at squared radius `u2`.
    fn log_weight(self, u2: f64) -> f64 {
        match self {
            NwKernel::Gaussian => -0.5 * u2,
            NwKernel::Epanechnikov => {
                if u2 < 1.0 {
                    math::ln(1.0 - u2)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Kernel-weighted averages of the row estimates. Weights are normalized in
/// the log domain; where every weight vanishes the nearest neighbour is used.
#[derive(Debug, Clone)]
pub struct NadarayaWatsonPair {
    sources: PointCloud,
    rows: RowEstimates,
    kernel: NwKernel,
    bandwidth: f64,
}

impl NadarayaWatsonPair {
    pub fn kernel(&self) -> NwKernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

impl TransportGrowth for NadarayaWatsonPair {
    fn dim(&self) -> usize {
        self.sources.dim()
    }

    fn evaluate_into(&self, x: &[f64], target: &mut [f64]) -> (f64, f64) {
        let inv_h2 = 1.0 / (self.bandwidth * self.bandwidth);
        let logs: Vec<f64> = self
            .sources
            .iter()
            .map(|p| {
                self.kernel
                    .log_weight(math::squared_distance(p, x) * inv_h2)
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            let i = nearest_index(&self.sources, x);
            target.copy_from_slice(self.rows.t_hat.point(i));
            return (self.rows.lambda_hat[i], self.rows.a_hat[i]);
        }
        let weights: Vec<f64> = logs.iter().map(|l| math::exp(l - max)).collect();
        let total = math::sum(&weights);
        target.iter_mut().for_each(|t| *t = 0.0);
        let (mut lambda, mut active) = (0.0, 0.0);
        for (i, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let w = w / total;
            for (t, ti) in target.iter_mut().zip(self.rows.t_hat.point(i)) {
                *t += w * ti;
            }
            lambda += w * self.rows.lambda_hat[i];
            active += w * self.rows.a_hat[i];
        }
        (lambda, active)
    }
}

pub fn extend_nw(
    rows: RowEstimates,
    sources: PointCloud,
    kernel: NwKernel,
    bandwidth: f64,
) -> Result<TransportGrowthPair> {
    check_rows(&rows, &sources)?;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "bandwidth",
            reason: "must be positive",
        });
    }
    Ok(TransportGrowthPair::NadarayaWatson(NadarayaWatsonPair {
        sources,
        rows,
        kernel,
        bandwidth,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extension {
    OneNn,
    NadarayaWatson { kernel: NwKernel, bandwidth: f64 },
}

/// Solves the empirical problem and extends the row estimates.
pub fn fit_plan_pair(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    solver: &SolverConfig,
    clip: &ClipBounds,
    extension: Extension,
) -> Result<(TransportGrowthPair, UotSolution)> {
    let solution = solve_discrete_uot(mu, nu, solver)?;
    let rows = row_estimates(&solution.plan, mu, nu.points(), clip)?;
    let sources = mu.points().clone();
    let pair = match extension {
        Extension::OneNn => extend_1nn(rows, sources)?,
        Extension::NadarayaWatson { kernel, bandwidth } => {
            extend_nw(rows, sources, kernel, bandwidth)?
        }
    };
    Ok((pair, solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cloud(xs: &[f64]) -> PointCloud {
        PointCloud::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn single_entry_row_hits_target() {
        let plan = TransportPlan::new(1, 3, vec![0.0, 0.7, 0.0]).unwrap();
        let (t, r) = barycentric_rows(&plan, &cloud(&[0.1]), &cloud(&[0.2, 0.9, 0.4])).unwrap();
        assert_eq!(t.point(0), &[0.9]);
        assert_eq!(r, vec![0.7]);
    }

    #[test]
    fn half_half_row_averages() {
        let plan = TransportPlan::new(1, 2, vec![0.5, 0.5]).unwrap();
        let (t, _) = barycentric_rows(&plan, &cloud(&[0.3]), &cloud(&[0.0, 1.0])).unwrap();
        assert_eq!(t.point(0), &[0.5]);
    }

    #[test]
    fn empty_row_keeps_source() {
        let plan = TransportPlan::new(2, 2, vec![0.0, 0.0, 0.2, 0.0]).unwrap();
        let (t, r) = barycentric_rows(&plan, &cloud(&[0.3, 0.6]), &cloud(&[0.0, 1.0])).unwrap();
        assert_eq!(t.point(0), &[0.3]);
        assert_eq!(t.point(1), &[0.0]);
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn growth_formulas() {
        let clip = ClipBounds::default();
        let x = cloud(&[0.5]);
        let (a, l) = growth_from_rows(&[0.5], &[0.5], &x, &x, &clip).unwrap();
        assert_eq!((a[0], l[0]), (1.0, 1.0));

        let tight = ClipBounds::new(0.1, 5.0).unwrap();
        let (a, l) = growth_from_rows(&[10.0], &[1.0], &x, &x, &tight).unwrap();
        assert_eq!(l[0], 5.0);
        assert_eq!(a[0], 10f64.sqrt());

        // |X - T|^2 = 4 needs d = 2 points at opposite corners... use d = 4
        let src = PointCloud::new(4, vec![0.0; 4]).unwrap();
        let tgt = PointCloud::new(4, vec![1.0; 4]).unwrap();
        let (_, l) = growth_from_rows(&[1.0], &[1.0], &tgt, &src, &clip).unwrap();
        assert!((l[0] - core::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn clip_bounds_validation() {
        assert!(ClipBounds::new(1.0, 1.0).is_err());
        assert!(ClipBounds::new(0.0, 1.0).is_err());
        assert_eq!(ClipBounds::default().w_minus(), 1e-3);
    }

    fn toy_rows() -> (RowEstimates, PointCloud) {
        let sources = cloud(&[0.2, 0.8]);
        let rows = RowEstimates {
            t_hat: cloud(&[0.25, 0.7]),
            r_hat: vec![1.0, 2.0],
            a_hat: vec![1.0, 2f64.sqrt()],
            lambda_hat: vec![1.1, 2.2],
        };
        (rows, sources)
    }

    #[test]
    fn nearest_neighbour_lookup() {
        let (rows, sources) = toy_rows();
        let pair = extend_1nn(rows, sources).unwrap();
        let v = pair.evaluate(&[0.3]);
        assert_eq!((v.target[0], v.lambda, v.active), (0.25, 1.1, 1.0));
        let v = pair.evaluate(&[0.8]);
        assert_eq!((v.target[0], v.lambda), (0.7, 2.2));
        // equidistant: lowest index
        let v = pair.evaluate(&[0.5]);
        assert_eq!(v.lambda, 1.1);
    }

    #[test]
    fn nw_limits() {
        let (rows, sources) = toy_rows();
        let nn = extend_1nn(rows.clone(), sources.clone()).unwrap();
        let nw = extend_nw(rows.clone(), sources.clone(), NwKernel::Gaussian, 1e-8).unwrap();
        for &q in &[0.0, 0.31, 0.49, 0.51, 0.77, 1.0] {
            assert_eq!(nw.evaluate(&[q]), nn.evaluate(&[q]));
        }
        let nw = extend_nw(rows.clone(), sources.clone(), NwKernel::Epanechnikov, 1e-8).unwrap();
        assert_eq!(nw.evaluate(&[0.31]), nn.evaluate(&[0.31]));

        let single = RowEstimates {
            t_hat: cloud(&[0.4]),
            r_hat: vec![1.0],
            a_hat: vec![0.9],
            lambda_hat: vec![0.81],
        };
        let nw = extend_nw(single, cloud(&[0.1]), NwKernel::Gaussian, 0.05).unwrap();
        for &q in &[0.0, 0.5, 1.0] {
            let v = nw.evaluate(&[q]);
            assert_eq!((v.target[0], v.lambda, v.active), (0.4, 0.81, 0.9));
        }

        let same = RowEstimates {
            t_hat: cloud(&[0.4, 0.4]),
            r_hat: vec![1.0, 1.0],
            a_hat: vec![0.9, 0.9],
            lambda_hat: vec![0.81, 0.81],
        };
        for &h in &[0.01, 0.3, 10.0] {
            let nw = extend_nw(same.clone(), cloud(&[0.1, 0.7]), NwKernel::Gaussian, h).unwrap();
            let v = nw.evaluate(&[0.33]);
            assert!((v.target[0] - 0.4).abs() < 1e-15);
            assert!((v.lambda - 0.81).abs() < 1e-15);
        }
        assert!(extend_nw(same, cloud(&[0.1, 0.7]), NwKernel::Gaussian, 0.0).is_err());
    }
}
