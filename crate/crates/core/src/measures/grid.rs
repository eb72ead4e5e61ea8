use alloc::vec::Vec;

use super::{DiscreteMeasure, PointCloud, SyntheticDensity};
use crate::error::{Error, Result};
use crate::math;

const NORMALIZATION_TOL: f64 = 1e-10;

/// Uniform grid of `R^d` cells on the unit cube with a normalized density
/// sampled at cell centers and a separately stored total mass.
///
/// Cells are flattened row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    dim: usize,
    resolution: usize,
    density: Vec<f64>,
    mass: f64,
}

impl GridMeasure {
    /// Checks shape, nonnegativity and that `sum(density) / R^d == 1` within 1e-10.
    pub fn new(dim: usize, resolution: usize, density: Vec<f64>, mass: f64) -> Result<Self> {
        let grid = Self::unchecked(dim, resolution, density, mass)?;
        let integral = math::sum(&grid.density) * grid.cell_volume();
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter {
                name: "density",
                reason: "cell values must integrate to one",
            });
        }
        Ok(grid)
    }

    /// Rescales nonnegative cell values to unit integral.
    pub fn normalized(dim: usize, resolution: usize, values: Vec<f64>, mass: f64) -> Result<Self> {
        let mut grid = Self::unchecked(dim, resolution, values, mass)?;
        let integral = math::sum(&grid.density) * grid.cell_volume();
        if !(integral > 1e-12) || !integral.is_finite() {
            return Err(Error::DegenerateDensity { integral });
        }
        for v in &mut grid.density {
            *v /= integral;
        }
        Ok(grid)
    }

    fn unchecked(dim: usize, resolution: usize, density: Vec<f64>, mass: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be positive",
            });
        }
        if resolution < 2 {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: "must be at least 2",
            });
        }
        let cells = cell_count(dim, resolution)?;
        if density.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                found: density.len(),
            });
        }
        for (index, &value) in density.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidMass(mass));
        }
        Ok(Self {
            dim,
            resolution,
            density,
            mass,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        math::pow(1.0 / self.resolution as f64, self.dim as f64)
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidMass(mass));
        }
        self.mass = mass;
        Ok(self)
    }

    /// Mass carried by cell `k`: density times cell volume times total mass.
    pub fn cell_weight(&self, k: usize) -> f64 {
        self.density[k] * self.cell_volume() * self.mass
    }

    pub fn cell_center(&self, k: usize, out: &mut [f64]) {
        cell_center(self.dim, self.resolution, k, out);
    }

    pub fn centers(&self) -> PointCloud {
        grid_centers(self.dim, self.resolution)
    }

    /// Flat index of the cell containing `x` (equivalently, the nearest center).
    pub fn cell_of(&self, x: &[f64]) -> usize {
        cell_of(self.dim, self.resolution, x)
    }

    /// Atoms at the centers of cells with positive density, with the flat
    /// index of each retained cell.
    pub fn to_discrete(&self) -> Result<(DiscreteMeasure, Vec<usize>)> {
        let vol = self.cell_volume();
        let mut kept = Vec::new();
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut center = alloc::vec![0.0; self.dim];
        for (k, &p) in self.density.iter().enumerate() {
            let w = p * vol * self.mass;
            if w > 0.0 {
                self.cell_center(k, &mut center);
                coords.extend_from_slice(&center);
                weights.push(w);
                kept.push(k);
            }
        }
        if kept.is_empty() {
            return Err(Error::DegenerateDensity { integral: 0.0 });
        }
        let measure = DiscreteMeasure::new(PointCloud::from_raw(self.dim, coords), weights)?;
        Ok((measure, kept))
    }

    pub fn same_layout(&self, other: &GridMeasure) -> bool {
        self.dim == other.dim && self.resolution == other.resolution
    }
}

fn cell_count(dim: usize, resolution: usize) -> Result<usize> {
    let mut cells: usize = 1;
    for _ in 0..dim {
        cells = cells
            .checked_mul(resolution)
            .ok_or(Error::InvalidParameter {
                name: "resolution",
                reason: "grid has too many cells",
            })?;
    }
    Ok(cells)
}

pub(crate) fn cell_center(dim: usize, resolution: usize, mut k: usize, out: &mut [f64]) {
    let h = 1.0 / resolution as f64;
    for axis in (0..dim).rev() {
        let idx = k % resolution;
        k /= resolution;
        out[axis] = (idx as f64 + 0.5) * h;
    }
}

pub(crate) fn cell_of(dim: usize, resolution: usize, x: &[f64]) -> usize {
    let mut k = 0;
    for &t in x.iter().take(dim) {
        let idx = math::floor(t * resolution as f64);
        let idx = if idx < 0.0 {
            0
        } else {
            (idx as usize).min(resolution - 1)
        };
        k = k * resolution + idx;
    }
    k
}

pub(crate) fn grid_centers(dim: usize, resolution: usize) -> PointCloud {
    let cells = math::pow(resolution as f64, dim as f64) as usize;
    let mut coords = alloc::vec![0.0; cells * dim];
    for (k, chunk) in coords.chunks_exact_mut(dim).enumerate() {
        cell_center(dim, resolution, k, chunk);
    }
    PointCloud::from_raw(dim, coords)
}

/// Cell-center discretization of an analytic density, renormalized to unit
/// integral, with `mass` attached.
pub fn density_to_grid(
    density: &SyntheticDensity,
    mass: f64,
    resolution: usize,
) -> Result<GridMeasure> {
    if resolution < 2 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: "must be at least 2",
        });
    }
    let centers = grid_centers(density.dim(), resolution);
    let values = centers.iter().map(|x| density.pdf(x)).collect();
    GridMeasure::normalized(density.dim(), resolution, values, mass)
}
