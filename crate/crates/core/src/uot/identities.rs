use alloc::vec::Vec;

use super::cost::CostMatrix;
use super::divergence::{kl_divergence, primal_objective};
use super::plan::{DualPotentials, TransportPlan};
use crate::error::{Error, Result};
use crate::math;
use crate::measures::{DiscreteMeasure, PointCloud};

const FEASIBILITY_TOL: f64 = 1e-9;

/// Terms of the exact excess identity
/// `lhs = slack + kl_row + kl_col` for a plan against a feasible oracle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessDecomposition {
    /// `sum_ij gamma_ij (C_ij - phi_i - psi_j)`
    pub slack: f64,
    /// `KL(gamma_0 | e^{-phi} mu)`
    pub kl_row: f64,
    /// `KL(gamma_1 | e^{-psi} nu)`
    pub kl_col: f64,
    /// primal value of the plan minus the oracle's dual objective
    pub lhs: f64,
}

impl ExcessDecomposition {
    pub fn rhs(&self) -> f64 {
        self.slack + self.kl_row + self.kl_col
    }
}

pub fn excess_decomposition(
    plan: &TransportPlan,
    oracle: &DualPotentials,
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<ExcessDecomposition> {
    if oracle.phi.len() != plan.rows() || oracle.psi.len() != plan.cols() {
        return Err(Error::DimensionMismatch {
            expected: plan.rows(),
            found: oracle.phi.len(),
        });
    }
    let violation = oracle.max_violation(cost);
    if violation > FEASIBILITY_TOL {
        return Err(Error::InfeasibleOracle { violation });
    }
    let mut slack_terms = Vec::with_capacity(plan.rows() * plan.cols());
    for i in 0..plan.rows() {
        let phi = oracle.phi[i];
        for (j, (&g, &c)) in plan.row(i).iter().zip(cost.row(i)).enumerate() {
            slack_terms.push(g * (c - phi - oracle.psi[j]));
        }
    }
    let slack = math::sum(&slack_terms);

    let row_ref: Vec<f64> = oracle
        .phi
        .iter()
        .zip(mu.weights())
        .map(|(p, w)| math::exp(-p) * w)
        .collect();
    let col_ref: Vec<f64> = oracle
        .psi
        .iter()
        .zip(nu.weights())
        .map(|(q, w)| math::exp(-q) * w)
        .collect();
    let kl_row = kl_divergence(plan.row_marginals(), &row_ref)?;
    let kl_col = kl_divergence(plan.col_marginals(), &col_ref)?;

    let zeta: Vec<f64> = oracle
        .phi
        .iter()
        .zip(mu.weights())
        .map(|(p, w)| -math::exp_m1_neg(*p) * w)
        .collect();
    let xi: Vec<f64> = oracle
        .psi
        .iter()
        .zip(nu.weights())
        .map(|(q, w)| -math::exp_m1_neg(*q) * w)
        .collect();
    let lhs = primal_objective(plan, cost, mu, nu)? - math::sum(&zeta) - math::sum(&xi);
    Ok(ExcessDecomposition {
        slack,
        kl_row,
        kl_col,
        lhs,
    })
}

/// Largest value of `(kappa/2)|y_j - T0(x_i)|^2 - (C_ij - phi_i - psi_j)` over
/// the given index pairs. Nonpositive when the oracle's gap dominates the
/// quadratic curvature bound on every pair.
pub fn verify_gap_lower_bound(
    oracle: &DualPotentials,
    cost: &CostMatrix,
    targets: &PointCloud,
    t0: &PointCloud,
    kappa: f64,
    pairs: &[(usize, usize)],
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &(i, j) in pairs {
        let gap = cost.get(i, j) - oracle.phi[i] - oracle.psi[j];
        let bound = 0.5 * kappa * math::squared_distance(targets.point(j), t0.point(i));
        worst = worst.max(bound - gap);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_oracle_identity_gap_bound() {
        let x = PointCloud::new(1, vec![0.0, 0.3, 0.8]).unwrap();
        let cost = CostMatrix::between(&x, &x).unwrap();
        let oracle = DualPotentials::new(vec![0.0; 3], vec![0.0; 3]);
        let pairs: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        for &kappa in &[0.0, 0.5, 1.0] {
            let v = verify_gap_lower_bound(&oracle, &cost, &x, &x, kappa, &pairs);
            assert!(v <= 1e-15, "kappa {kappa}: {v}");
        }
    }

    #[test]
    fn rejects_infeasible_oracle() {
        let x = PointCloud::new(1, vec![0.0, 1.0]).unwrap();
        let mu = DiscreteMeasure::new(x.clone(), vec![1.0, 1.0]).unwrap();
        let cost = CostMatrix::between(&x, &x).unwrap();
        let plan = TransportPlan::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let oracle = DualPotentials::new(vec![0.1, 0.0], vec![0.0, 0.0]);
        assert!(matches!(
            excess_decomposition(&plan, &oracle, &cost, &mu, &mu),
            Err(Error::InfeasibleOracle { .. })
        ));
    }

    #[test]
    fn zero_oracle_lhs_is_primal() {
        let x = PointCloud::new(1, vec![0.2, 0.6]).unwrap();
        let mu = DiscreteMeasure::new(x.clone(), vec![0.5, 0.5]).unwrap();
        let cost = CostMatrix::between(&x, &x).unwrap();
        let plan = TransportPlan::new(2, 2, vec![0.4, 0.05, 0.0, 0.5]).unwrap();
        let oracle = DualPotentials::new(vec![0.0; 2], vec![0.0; 2]);
        let e = excess_decomposition(&plan, &oracle, &cost, &mu, &mu).unwrap();
        let primal = primal_objective(&plan, &cost, &mu, &mu).unwrap();
        assert_eq!(e.lhs, primal);
        assert!((e.lhs - e.rhs()).abs() < 1e-12);
    }
}
