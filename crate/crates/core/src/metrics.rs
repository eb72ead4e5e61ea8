//! Risk functionals, exact 1D Wasserstein distance and log-log rate fits.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::measures::{DiscreteMeasure, GridMeasure, PointCloud};
use crate::pair::TransportGrowth;

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub map_mse: f64,
    pub growth_mse: f64,
    pub n: usize,
    pub estimator_id: String,
    pub seed: u64,
}

/// `(int |T - T0|^2 dmu, int |lambda - lambda0|^2 dmu)` by quadrature over the
/// cells of `mu_grid`, each weighted by its mass.
pub fn map_risk(
    pair: &dyn TransportGrowth,
    oracle: &dyn TransportGrowth,
    mu_grid: &GridMeasure,
) -> Result<(f64, f64)> {
    let d = mu_grid.dim();
    if pair.dim() != d || oracle.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: pair.dim(),
        });
    }
    let mut x = alloc::vec![0.0; d];
    let mut t = alloc::vec![0.0; d];
    let mut t0 = alloc::vec![0.0; d];
    let mut map_terms = Vec::with_capacity(mu_grid.len());
    let mut growth_terms = Vec::with_capacity(mu_grid.len());
    for k in 0..mu_grid.len() {
        let w = mu_grid.cell_weight(k);
        if w == 0.0 {
            continue;
        }
        mu_grid.cell_center(k, &mut x);
        let (lam, _) = pair.evaluate_into(&x, &mut t);
        let (lam0, _) = oracle.evaluate_into(&x, &mut t0);
        map_terms.push(w * math::squared_distance(&t, &t0));
        growth_terms.push(w * (lam - lam0) * (lam - lam0));
    }
    Ok((math::sum(&map_terms), math::sum(&growth_terms)))
}

/// Monte Carlo version of [`map_risk`]: averages over held-out points drawn
/// from the normalized source law and multiplies by `mass`.
pub fn map_risk_sampled(
    pair: &dyn TransportGrowth,
    oracle: &dyn TransportGrowth,
    points: &PointCloud,
    mass: f64,
) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = points.dim();
    let mut t = alloc::vec![0.0; d];
    let mut t0 = alloc::vec![0.0; d];
    let mut map_terms = Vec::with_capacity(points.len());
    let mut growth_terms = Vec::with_capacity(points.len());
    for x in points.iter() {
        let (lam, _) = pair.evaluate_into(x, &mut t);
        let (lam0, _) = oracle.evaluate_into(x, &mut t0);
        map_terms.push(math::squared_distance(&t, &t0));
        growth_terms.push((lam - lam0) * (lam - lam0));
    }
    let scale = mass / points.len() as f64;
    Ok((
        math::sum(&map_terms) * scale,
        math::sum(&growth_terms) * scale,
    ))
}

/// Squared 2-Wasserstein distance between equal-mass measures on the line via
/// the monotone (quantile) coupling.
pub fn w2_1d_exact(alpha: &DiscreteMeasure, beta: &DiscreteMeasure) -> Result<f64> {
    if alpha.dim() != 1 || beta.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: alpha.dim().max(beta.dim()),
        });
    }
    let (ma, mb) = (alpha.total_mass(), beta.total_mass());
    if (ma - mb).abs() > 1e-9 {
        return Err(Error::MassMismatch {
            left: ma,
            right: mb,
        });
    }
    let sorted = |m: &DiscreteMeasure| {
        let mut atoms: Vec<(f64, f64)> = m
            .points()
            .coords()
            .iter()
            .copied()
            .zip(m.weights().iter().copied())
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms
    };
    let a = sorted(alpha);
    let b = sorted(beta);

    // walk both CDFs; each step moves `take` mass between the current atoms
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut terms = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        let take = ra.min(rb);
        let diff = a[i].0 - b[j].0;
        terms.push(take * diff * diff);
        ra -= take;
        rb -= take;
        if ra <= rb {
            i += 1;
            if i < a.len() {
                ra = a[i].1;
            }
        } else {
            j += 1;
            if j < b.len() {
                rb = b[j].1;
            }
        }
    }
    Ok(math::sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// standard error of the slope; zero with only two points
    pub stderr: f64,
}

/// Ordinary least squares of `log(mse)` on `log(n)`.
pub fn loglog_rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(n, mse) in points {
        if !(n > 0.0 && mse > 0.0) || !mse.is_finite() {
            return Err(Error::DegenerateFit);
        }
        xs.push(math::ln(n));
        ys.push(math::ln(mse));
    }
    let k = xs.len();
    let distinct = xs.iter().any(|x| *x != xs[0]);
    if k < 2 || !distinct {
        return Err(Error::DegenerateFit);
    }
    let mx = math::sum(&xs) / k as f64;
    let my = math::sum(&ys) / k as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if k > 2 {
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        math::sqrt(ssr / (k - 2) as f64 / sxx)
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        stderr,
    })
}
