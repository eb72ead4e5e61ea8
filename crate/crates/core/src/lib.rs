//! Estimation of transport-growth pairs for unbalanced optimal transport with
//! quadratic cost and KL marginal penalties (the Gaussian-Hellinger model).
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`measures`] | discrete and grid measures, synthetic densities, samplers |
//! | [`uot`] | annealed log-domain unbalanced scaling solver, c-transforms, KL, excess identity |
//! | [`plan_estimator`] | barycentric rows, clipped growth, 1NN and Nadaraya-Watson extensions |
//! | [`kernel_density`] | Neumann cosine kernel with smooth spectral cutoff |
//! | [`kernel_estimator`] | plug-in pair from grid dual potentials |
//! | [`metrics`] | risks, exact 1D Wasserstein, log-log rate fitting |
//!
//! Everything here is pure: randomness is driven by explicit seeds and all
//! values are immutable once built. File formats, the benchmark harness and
//! the command line live in the companion `ghuot-cli` crate.
//!
//! ```
//! use ghuot::measures::{DiscreteMeasure, PointCloud};
//! use ghuot::uot::{solve_discrete_uot, SolverConfig};
//!
//! let mu = DiscreteMeasure::new(PointCloud::new(1, vec![0.0]).unwrap(), vec![1.0]).unwrap();
//! let nu = DiscreteMeasure::new(PointCloud::new(1, vec![0.0]).unwrap(), vec![4.0]).unwrap();
//! let sol = solve_discrete_uot(&mu, &nu, &SolverConfig::default()).unwrap();
//! // (sqrt(1) - sqrt(4))^2
//! assert!((sol.primal_value - 1.0).abs() < 1e-3);
//! ```
#![no_std]
#![allow(clippy::too_many_arguments)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub(crate) mod math;

pub mod kernel_density;
pub mod kernel_estimator;
pub mod measures;
pub mod metrics;
pub mod pair;
pub mod plan_estimator;
pub mod uot;

pub use error::{Error, Result};
pub use pair::{evaluate_pair, Backing, PairValue, TransportGrowth, TransportGrowthPair};
