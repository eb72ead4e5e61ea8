use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{MassEstimate, PointCloud, SyntheticDensity};
use crate::error::{Error, Result};

/// `n` i.i.d. draws by per-coordinate inverse CDF. Deterministic in `seed`.
pub fn sample_iid(density: &SyntheticDensity, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw(density, n, &mut rng)
}

fn draw<R: Rng>(density: &SyntheticDensity, n: usize, rng: &mut R) -> PointCloud {
    let d = density.dim();
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        let u: f64 = rng.random();
        coords.push(density.inverse_cdf_1d(u));
    }
    PointCloud::from_raw(d, coords)
}

/// Poisson point process with intensity `mass * density`: draws
/// `N ~ Poisson(mass)` and then `N` i.i.d. points. The count is returned as
/// the mass estimate; `N = 0` yields an empty cloud and an invalid estimate.
pub fn sample_ppp(
    density: &SyntheticDensity,
    mass: f64,
    seed: u64,
) -> Result<(PointCloud, MassEstimate)> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidMass(mass));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(mass).map_err(|_| Error::InvalidMass(mass))?;
    let count = poisson.sample(&mut rng) as u64;
    let points = draw(density, count as usize, &mut rng);
    Ok((points, MassEstimate::poisson_count(count)))
}
