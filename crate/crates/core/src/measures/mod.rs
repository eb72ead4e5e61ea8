//! Measure representations on the unit hypercube, synthetic densities,
//! samplers and total-mass estimates.

mod density;
pub(crate) mod grid;
mod sampling;

pub use density::SyntheticDensity;
pub use grid::{density_to_grid, GridMeasure};
pub use sampling::{sample_iid, sample_ppp};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Points in `[0, 1]^d`, stored row-major (point-major).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Validates that `coords.len()` is a multiple of `dim` and every
    /// coordinate lies in `[0, 1]`. Out-of-domain values are rejected, never
    /// clamped.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be positive",
            });
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        for (k, &c) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::OutOfDomain {
                    index: k / dim,
                    value: c,
                });
            }
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && coords.len() % dim == 0);
        Self { dim, coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Reorders points so that point `k` of the result is `self.point(order[k])`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(self.coords.len());
        for &i in order {
            coords.extend_from_slice(self.point(i));
        }
        Self::from_raw(self.dim, coords)
    }
}

/// Finite atomic measure with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: PointCloud,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        math::sum(&self.weights)
    }

    /// Same support, every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.points.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassSource {
    Known,
    PoissonCount,
    External,
}

/// Total-mass estimate attached to a normalized sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    pub value: f64,
    pub source: MassSource,
}

impl MassEstimate {
    pub fn known(value: f64) -> Result<Self> {
        Self::checked(value, MassSource::Known)
    }

    pub fn external(value: f64) -> Result<Self> {
        Self::checked(value, MassSource::External)
    }

    /// The realized count of a Poisson process. A zero count is kept as an
    /// invalid estimate rather than rejected.
    pub fn poisson_count(count: u64) -> Self {
        Self {
            value: count as f64,
            source: MassSource::PoissonCount,
        }
    }

    fn checked(value: f64, source: MassSource) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self { value, source })
        } else {
            Err(Error::InvalidMass(value))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.value > 0.0 && self.value.is_finite()
    }
}

/// Atoms at `points` with equal weight `mass / n`.
pub fn weighted_empirical(points: PointCloud, mass: &MassEstimate) -> Result<DiscreteMeasure> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    if !mass.is_valid() {
        return Err(Error::InvalidMass(mass.value));
    }
    let w = mass.value / points.len() as f64;
    let weights = alloc::vec![w; points.len()];
    DiscreteMeasure::new(points, weights)
}
