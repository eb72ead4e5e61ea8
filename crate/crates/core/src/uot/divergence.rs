use alloc::vec::Vec;

use super::cost::CostMatrix;
use super::plan::{DualPotentials, TransportPlan};
use crate::error::{Error, Result};
use crate::math;
use crate::measures::DiscreteMeasure;

/// Generalized KL `sum_i ref_i F(eta_i / ref_i)` with `F(r) = r log r - r + 1`
/// and `0 log 0 = 0`.
pub fn kl_divergence(eta: &[f64], reference: &[f64]) -> Result<f64> {
    if eta.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: eta.len(),
        });
    }
    let mut terms = Vec::with_capacity(eta.len());
    for (index, (&e, &r)) in eta.iter().zip(reference).enumerate() {
        if e < 0.0 || e.is_nan() {
            return Err(Error::NegativeWeight { index, value: e });
        }
        if !(r > 0.0) {
            return Err(Error::NonPositiveWeight { index, value: r });
        }
        let t = if e == 0.0 {
            r
        } else {
            e * math::ln(e / r) - e + r
        };
        // each term is >= 0 mathematically
        terms.push(t.max(0.0));
    }
    Ok(math::sum(&terms))
}

/// `sum_i (1 - e^{-phi_i}) mu_i + sum_j (1 - e^{-psi_j}) nu_j`.
///
/// Potentials at `+inf` contribute the full atom mass.
pub fn dual_objective(
    potentials: &DualPotentials,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> f64 {
    fn side(values: &[f64], weights: &[f64]) -> f64 {
        let terms: Vec<f64> = values
            .iter()
            .zip(weights)
            .map(|(&v, &w)| -math::exp_m1_neg(v) * w)
            .collect();
        math::sum(&terms)
    }
    side(&potentials.phi, mu.weights()) + side(&potentials.psi, nu.weights())
}

/// Unregularized objective `<C, gamma> + KL(gamma_0 | mu) + KL(gamma_1 | nu)`.
pub fn primal_objective(
    plan: &TransportPlan,
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<f64> {
    Ok(plan.transport_cost(cost)
        + kl_divergence(plan.row_marginals(), mu.weights())?
        + kl_divergence(plan.col_marginals(), nu.weights())?)
}
