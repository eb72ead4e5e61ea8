//! Discrete unbalanced optimal transport with cost `|x - y|^2 / 2` and unit
//! KL penalties on both marginals.

mod cost;
mod divergence;
mod identities;
mod plan;
mod solver;

pub use cost::{c_transform, CostMatrix, Side};
pub use divergence::{dual_objective, kl_divergence, primal_objective};
pub use identities::{excess_decomposition, verify_gap_lower_bound, ExcessDecomposition};
pub use plan::{DualPotentials, TransportPlan};
pub use solver::{solve_discrete_uot, tighten_potentials, SolverConfig, UotSolution};
