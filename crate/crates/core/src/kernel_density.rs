//! Boundary-adapted density estimation on `[0, 1]^d` with a separable Neumann
//! cosine kernel and a smooth spectral cutoff.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;
use crate::measures::grid::grid_centers;
use crate::measures::{GridMeasure, MassEstimate, PointCloud};

#[inline]
fn bump(s: f64) -> f64 {
    if s > 0.0 {
        math::exp(-1.0 / s)
    } else {
        0.0
    }
}

/// Smooth cutoff: 1 on `[0, 1]`, 0 on `[2, inf)`, `C^inf` in between.
///
/// The denominator never vanishes: at least one of the two bumps is positive
/// for every `t`, and underflow only ever zeroes the smaller one.
pub fn cutoff_tau(t: f64) -> f64 {
    let a = bump(2.0 - t);
    let b = bump(t - 1.0);
    a / (a + b)
}

/// `kappa_L(u, v) = 1 + sum_l tau(pi^2 l^2 / L^2) * 2 cos(pi l u) cos(pi l v)`
/// and its tensor product over `d` axes.
///
/// Only modes with a nonzero multiplier are kept, so one evaluation costs
/// `O(d L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannKernel {
    l: f64,
    dim: usize,
    modes: Vec<(f64, f64)>,
}

impl NeumannKernel {
    pub fn new(l: f64, dim: usize) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: "must be positive",
            });
        }
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be positive",
            });
        }
        let mut modes = Vec::new();
        let mut ell = 1u64;
        loop {
            let t = PI * PI * (ell * ell) as f64 / (l * l);
            if t >= 2.0 {
                break;
            }
            let tau = cutoff_tau(t);
            if tau > 0.0 {
                modes.push((PI * ell as f64, 2.0 * tau));
            }
            ell += 1;
        }
        Ok(Self { l, dim, modes })
    }

    pub fn resolution(&self) -> f64 {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Active mode indices `l >= 1` with their multipliers `2 tau(...)`.
    pub fn active_modes(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.modes
            .iter()
            .map(|&(freq, mult)| ((freq / PI + 0.5) as u64, mult))
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn kappa(&self, u: f64, v: f64) -> f64 {
        let mut acc = 1.0;
        for &(freq, mult) in &self.modes {
            acc += mult * math::cos(freq * u) * math::cos(freq * v);
        }
        acc
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        x.iter().zip(y).map(|(&u, &v)| self.kappa(u, v)).product()
    }
}

/// Unclipped estimate `p(x) = (1/n) sum_i K_L(x, X_i)`; may be negative.
#[derive(Debug, Clone)]
pub struct RawDensity {
    kernel: NeumannKernel,
    samples: PointCloud,
}

impl RawDensity {
    pub fn kernel(&self) -> &NeumannKernel {
        &self.kernel
    }

    pub fn samples(&self) -> &PointCloud {
        &self.samples
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .samples
            .iter()
            .map(|xi| self.kernel.eval(x, xi))
            .collect();
        math::sum(&terms) / self.samples.len() as f64
    }

    /// Values at the `R^d` cell centers (row-major, axis 0 slowest).
    ///
    /// Uses the expansion `p(x) = sum_l c_l prod_a m_{l_a} cos(pi l_a x_a)`
    /// with empirical cosine coefficients `c_l`, which equals the kernel
    /// average term by term.
    pub fn eval_grid(&self, resolution: usize) -> Vec<f64> {
        let d = self.kernel.dim();
        let n = self.samples.len();
        // mode 0 is the constant term
        let mut freqs = alloc::vec![0.0];
        let mut mults = alloc::vec![1.0];
        for &(freq, mult) in &self.kernel.modes {
            freqs.push(freq);
            mults.push(mult);
        }
        let m = freqs.len();
        let count = math::pow(m as f64, d as f64) as usize;

        let mut coeffs = alloc::vec![0.0; count];
        let mut axis_terms = alloc::vec![0.0; d * m];
        let mut prod = alloc::vec![0.0; count];
        for xi in self.samples.iter() {
            for (a, &v) in xi.iter().enumerate() {
                for l in 0..m {
                    axis_terms[a * m + l] = math::cos(freqs[l] * v);
                }
            }
            tensor_product(&axis_terms, d, m, &mut prod);
            for (c, p) in coeffs.iter_mut().zip(&prod) {
                *c += p;
            }
        }
        let scale = 1.0 / n as f64;
        let mut mult_tensor = alloc::vec![0.0; count];
        let repeated: Vec<f64> = (0..d).flat_map(|_| mults.iter().copied()).collect();
        tensor_product(&repeated, d, m, &mut mult_tensor);
        for (c, w) in coeffs.iter_mut().zip(&mult_tensor) {
            *c *= scale * w;
        }

        let h = 1.0 / resolution as f64;
        // basis[l * R + k] = cos(pi l (k + 1/2) / R)
        let mut basis = Vec::with_capacity(m * resolution);
        for &f in &freqs {
            for k in 0..resolution {
                basis.push(math::cos(f * (k as f64 + 0.5) * h));
            }
        }
        let cells = grid_centers(d, resolution).len();
        let mut idx = alloc::vec![0usize; d];
        let mut out = Vec::with_capacity(cells);
        let mut cell_terms = alloc::vec![0.0; d * m];
        for k in 0..cells {
            let mut rem = k;
            for axis in (0..d).rev() {
                idx[axis] = rem % resolution;
                rem /= resolution;
            }
            for (a, &ia) in idx.iter().enumerate() {
                for l in 0..m {
                    cell_terms[a * m + l] = basis[l * resolution + ia];
                }
            }
            tensor_product(&cell_terms, d, m, &mut prod);
            out.push(math::dot(&coeffs, &prod));
        }
        out
    }
}

/// Outer product of `d` vectors of length `m` stored back to back, written
/// row-major (axis 0 slowest) into `out` of length `m^d`.
fn tensor_product(axis_terms: &[f64], d: usize, m: usize, out: &mut [f64]) {
    out[..m].copy_from_slice(&axis_terms[..m]);
    let mut len = m;
    for a in 1..d {
        let terms = &axis_terms[a * m..(a + 1) * m];
        for p in (0..len).rev() {
            let base = out[p];
            for (l, t) in terms.iter().enumerate() {
                out[p * m + l] = base * t;
            }
        }
        len *= m;
    }
}

pub fn fit_density(samples: &PointCloud, l: f64) -> Result<RawDensity> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(RawDensity {
        kernel: NeumannKernel::new(l, samples.dim())?,
        samples: samples.clone(),
    })
}

/// Positive part at cell centers, rescaled to unit integral, with the mass
/// estimate attached.
pub fn renormalize_positive(
    raw: &RawDensity,
    resolution: usize,
    mass: &MassEstimate,
) -> Result<GridMeasure> {
    if resolution < 2 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: "must be at least 2",
        });
    }
    if !mass.is_valid() {
        return Err(Error::InvalidMass(mass.value));
    }
    let values: Vec<f64> = raw
        .eval_grid(resolution)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let d = raw.kernel.dim();
    let vol = math::pow(1.0 / resolution as f64, d as f64);
    let integral = math::sum(&values) * vol;
    if !(integral > 1e-12) {
        return Err(Error::DegenerateDensity { integral });
    }
    GridMeasure::normalized(d, resolution, values, mass.value)
}

/// `L = L0 (n / n0)^{1 / (d + 2 (alpha - 1))}`.
pub fn resolution_rule(n: usize, d: usize, alpha: f64, l0: f64, n0: usize) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: "must exceed 1",
        });
    }
    if n == 0 || n0 == 0 || d == 0 || !(l0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "resolution_rule",
            reason: "n, n0, d and L0 must be positive",
        });
    }
    let exponent = 1.0 / (d as f64 + 2.0 * (alpha - 1.0));
    Ok(l0 * math::pow(n as f64 / n0 as f64, exponent))
}
