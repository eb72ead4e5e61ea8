#![allow(dead_code)]

use ghuot::measures::{DiscreteMeasure, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointCloud {
    PointCloud::new(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Random atoms with weights in `[0.5, 1.5] * mass / n`.
pub fn random_measure(rng: &mut ChaCha8Rng, n: usize, d: usize, mass: f64) -> DiscreteMeasure {
    let points = random_cloud(rng, n, d);
    let weights = (0..n)
        .map(|_| mass / n as f64 * rng.random_range(0.5..1.5))
        .collect();
    DiscreteMeasure::new(points, weights).unwrap()
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, computed by Newton's method
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}
