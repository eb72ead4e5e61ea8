use alloc::vec::Vec;

use super::cost::CostMatrix;
use crate::error::{Error, Result};
use crate::math;

/// Nonnegative `n x m` coupling with cached marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    gamma: Vec<f64>,
    row_marginals: Vec<f64>,
    col_marginals: Vec<f64>,
}

impl TransportPlan {
    pub fn new(rows: usize, cols: usize, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: gamma.len(),
            });
        }
        for (index, &value) in gamma.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        let row_marginals: Vec<f64> = gamma.chunks_exact(cols.max(1)).map(math::sum).collect();
        let mut col_marginals = alloc::vec![0.0; cols];
        let mut column = alloc::vec![0.0; rows];
        for (j, slot) in col_marginals.iter_mut().enumerate() {
            for (i, c) in column.iter_mut().enumerate() {
                *c = gamma[i * cols + j];
            }
            *slot = math::sum(&column);
        }
        Ok(Self {
            rows,
            cols,
            gamma,
            row_marginals,
            col_marginals,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.gamma
    }

    pub fn row_marginals(&self) -> &[f64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[f64] {
        &self.col_marginals
    }

    pub fn total_mass(&self) -> f64 {
        math::sum(&self.row_marginals)
    }

    pub fn transport_cost(&self, cost: &CostMatrix) -> f64 {
        let terms: Vec<f64> = self
            .gamma
            .iter()
            .zip(cost.entries())
            .map(|(g, c)| g * c)
            .collect();
        math::sum(&terms)
    }

    pub fn transposed(&self) -> Self {
        let mut gamma = alloc::vec![0.0; self.gamma.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                gamma[j * self.rows + i] = self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            gamma,
            row_marginals: self.col_marginals.clone(),
            col_marginals: self.row_marginals.clone(),
        }
    }
}

/// Dual pair `(phi, psi)` on source and target atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl DualPotentials {
    pub fn new(phi: Vec<f64>, psi: Vec<f64>) -> Self {
        Self { phi, psi }
    }

    /// `max_ij (phi_i + psi_j - C_ij)`; feasible pairs give a value `<= 0`.
    pub fn max_violation(&self, cost: &CostMatrix) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, p) in self.phi.iter().enumerate() {
            for (c, q) in cost.row(i).iter().zip(&self.psi) {
                worst = worst.max(p + q - c);
            }
        }
        worst
    }

    pub fn is_feasible(&self, cost: &CostMatrix, tol: f64) -> bool {
        self.max_violation(cost) <= tol
    }

    /// `(phi + c, psi - c)`; dual feasibility is unchanged.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            phi: self.phi.iter().map(|p| p + c).collect(),
            psi: self.psi.iter().map(|q| q - c).collect(),
        }
    }
}
