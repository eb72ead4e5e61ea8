use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::measures::PointCloud;

/// Dense `n x m` matrix of `|X_i - Y_j|^2 / 2`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn between(x: &PointCloud, y: &PointCloud) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        let mut entries = Vec::with_capacity(x.len() * y.len());
        for xi in x.iter() {
            for yj in y.iter() {
                entries.push(0.5 * math::squared_distance(xi, yj));
            }
        }
        Ok(Self {
            rows: x.len(),
            cols: y.len(),
            entries,
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
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Which index of the cost matrix the input potential lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Input indexed by rows (source points); output indexed by columns.
    Rows,
    /// Input indexed by columns (target points); output indexed by rows.
    Cols,
}

/// Discrete c-transform `out_k = min_l (C_kl - values_l)`. Ties resolve to the
/// lowest index, which only matters for callers tracking the argmin.
pub fn c_transform(values: &[f64], cost: &CostMatrix, side: Side) -> Vec<f64> {
    match side {
        Side::Cols => {
            assert_eq!(values.len(), cost.cols());
            (0..cost.rows())
                .map(|i| {
                    let row = cost.row(i);
                    let mut best = f64::INFINITY;
                    for (c, v) in row.iter().zip(values) {
                        let cand = c - v;
                        if cand < best {
                            best = cand;
                        }
                    }
                    best
                })
                .collect()
        }
        Side::Rows => {
            assert_eq!(values.len(), cost.rows());
            let mut out = alloc::vec![f64::INFINITY; cost.cols()];
            for (i, v) in values.iter().enumerate() {
                for (o, c) in out.iter_mut().zip(cost.row(i)) {
                    let cand = c - v;
                    if cand < *o {
                        *o = cand;
                    }
                }
            }
            out
        }
    }
}
