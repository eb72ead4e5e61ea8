//! Evaluable transport-growth pairs `x -> (T(x), lambda(x), a(x))`.

use alloc::vec::Vec;

use crate::kernel_estimator::GridPotentials;
use crate::measures::PointCloud;
use crate::plan_estimator::{NadarayaWatsonPair, NearestNeighborPair, NwKernel};

#[derive(Debug, Clone, PartialEq)]
pub struct PairValue {
    pub target: Vec<f64>,
    pub lambda: f64,
    /// active-source factor
    pub active: f64,
}

/// Anything that maps a query point to a target point, a growth value and an
/// active-source factor.
pub trait TransportGrowth {
    fn dim(&self) -> usize;

    /// Writes the target into `target` and returns `(lambda, active)`.
    fn evaluate_into(&self, x: &[f64], target: &mut [f64]) -> (f64, f64);

    fn evaluate(&self, x: &[f64]) -> PairValue {
        let mut target = alloc::vec![0.0; self.dim()];
        let (lambda, active) = self.evaluate_into(x, &mut target);
        PairValue {
            target,
            lambda,
            active,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backing {
    OneNn,
    NadarayaWatson { kernel: NwKernel, bandwidth: f64 },
    GridPotentials,
}

#[derive(Debug, Clone)]
pub enum TransportGrowthPair {
    OneNn(NearestNeighborPair),
    NadarayaWatson(NadarayaWatsonPair),
    Grid(GridPotentials),
}

impl TransportGrowthPair {
    pub fn backing(&self) -> Backing {
        match self {
            Self::OneNn(_) => Backing::OneNn,
            Self::NadarayaWatson(p) => Backing::NadarayaWatson {
                kernel: p.kernel(),
                bandwidth: p.bandwidth(),
            },
            Self::Grid(_) => Backing::GridPotentials,
        }
    }
}

impl TransportGrowth for TransportGrowthPair {
    fn dim(&self) -> usize {
        match self {
            Self::OneNn(p) => p.dim(),
            Self::NadarayaWatson(p) => p.dim(),
            Self::Grid(p) => p.dim(),
        }
    }

    fn evaluate_into(&self, x: &[f64], target: &mut [f64]) -> (f64, f64) {
        match self {
            Self::OneNn(p) => p.evaluate_into(x, target),
            Self::NadarayaWatson(p) => p.evaluate_into(x, target),
            Self::Grid(p) => p.evaluate_into(x, target),
        }
    }
}

/// Batch evaluation in query order.
pub fn evaluate_pair<P: TransportGrowth + ?Sized>(
    pair: &P,
    queries: &PointCloud,
) -> Vec<PairValue> {
    queries.iter().map(|x| pair.evaluate(x)).collect()
}
