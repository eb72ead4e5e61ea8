mod common;

use ghuot::measures::{DiscreteMeasure, PointCloud};
use ghuot::plan_estimator::{
    barycentric_rows, extend_1nn, extend_nw, fit_plan_pair, growth_from_rows, row_estimates,
    ClipBounds, Extension, NwKernel, RowEstimates,
};
use ghuot::uot::{SolverConfig, TransportPlan};
use ghuot::{evaluate_pair, Backing, TransportGrowth};
use rand::Rng;

fn cloud(d: usize, xs: &[f64]) -> PointCloud {
    PointCloud::new(d, xs.to_vec()).unwrap()
}

fn fitted(
    seed: u64,
    n: usize,
    m: usize,
    d: usize,
) -> (DiscreteMeasure, DiscreteMeasure, RowEstimates) {
    let mut rng = common::rng(seed);
    let mu = common::random_measure(&mut rng, n, d, 1.0);
    let nu = common::random_measure(&mut rng, m, d, 2.5);
    let (pair, _) = fit_plan_pair(
        &mu,
        &nu,
        &SolverConfig::default(),
        &ClipBounds::default(),
        Extension::OneNn,
    )
    .unwrap();
    let rows = match pair {
        ghuot::TransportGrowthPair::OneNn(p) => p.rows().clone(),
        _ => unreachable!(),
    };
    (mu, nu, rows)
}

/// Support-function test of membership in the convex hull of `hull`.
fn in_hull(x: &[f64], hull: &[&[f64]], directions: &[Vec<f64>]) -> bool {
    directions.iter().all(|u| {
        let dot = |p: &[f64]| p.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        let support = hull
            .iter()
            .map(|p| dot(p))
            .fold(f64::NEG_INFINITY, f64::max);
        dot(x) <= support + 1e-12
    })
}

#[test]
fn targets_stay_in_convex_hull() {
    let mut rng = common::rng(40);
    let directions: Vec<Vec<f64>> = (0..64)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 64.0;
            vec![a.cos(), a.sin()]
        })
        .collect();
    for seed in 0..4 {
        let (mu, nu, rows) = fitted(seed, 15, 12, 2);
        let mut hull: Vec<&[f64]> = nu.points().iter().collect();
        hull.extend(mu.points().iter());
        for t in rows.t_hat.iter() {
            assert!(in_hull(t, &hull, &directions));
        }
        for pair in [
            extend_1nn(rows.clone(), mu.points().clone()).unwrap(),
            extend_nw(rows.clone(), mu.points().clone(), NwKernel::Gaussian, 0.2).unwrap(),
            extend_nw(
                rows.clone(),
                mu.points().clone(),
                NwKernel::Epanechnikov,
                0.3,
            )
            .unwrap(),
        ] {
            let queries = common::random_cloud(&mut rng, 50, 2);
            for v in evaluate_pair(&pair, &queries) {
                assert!(in_hull(&v.target, &hull, &directions));
            }
        }
    }
}

#[test]
fn one_nn_interpolates_exactly() {
    let (mu, _, rows) = fitted(41, 20, 10, 1);
    let pair = extend_1nn(rows.clone(), mu.points().clone()).unwrap();
    assert_eq!(pair.backing(), Backing::OneNn);
    for (i, x) in mu.points().iter().enumerate() {
        let v = pair.evaluate(x);
        assert_eq!(v.target.as_slice(), rows.t_hat.point(i));
        assert_eq!(v.lambda.to_bits(), rows.lambda_hat[i].to_bits());
        assert_eq!(v.active.to_bits(), rows.a_hat[i].to_bits());
    }
}

#[test]
fn row_estimate_invariants() {
    let (mu, nu, rows) = fitted(42, 25, 20, 2);
    let clip = ClipBounds::default();
    let (lo, hi) = (1.0f64, (0.5f64).exp()); // exp(|x - t|^2 / 4) on the unit square
    for i in 0..rows.len() {
        assert_eq!(rows.a_hat[i], (rows.r_hat[i] / mu.weights()[i]).sqrt());
        assert!(rows.lambda_hat[i] >= clip.w_minus() * lo);
        assert!(rows.lambda_hat[i] <= clip.w_plus() * hi);
    }
    let direct = row_estimates(
        &ghuot::uot::solve_discrete_uot(&mu, &nu, &SolverConfig::default())
            .unwrap()
            .plan,
        &mu,
        nu.points(),
        &clip,
    )
    .unwrap();
    assert_eq!(direct, rows);
}

#[test]
fn clipping_is_monotone() {
    let mut rng = common::rng(43);
    let n = 50;
    let sources = common::random_cloud(&mut rng, n, 2);
    let t_hat = common::random_cloud(&mut rng, n, 2);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let r_hat: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let mut previous: Option<Vec<f64>> = None;
    for w_plus in [0.5, 1.0, 2.0, 10.0, 1e3] {
        let clip = ClipBounds::new(1e-3, w_plus).unwrap();
        let (_, lambda) = growth_from_rows(&r_hat, &weights, &t_hat, &sources, &clip).unwrap();
        if let Some(prev) = &previous {
            assert!(lambda.iter().zip(prev).all(|(a, b)| a >= b));
        }
        previous = Some(lambda);
    }
    let clip = ClipBounds::new(0.1, 5.0).unwrap();
    for i in 0..n {
        let lambdas: Vec<f64> = (0..20)
            .map(|k| k as f64 * 0.5)
            .map(|r| {
                growth_from_rows(
                    &[r],
                    &weights[i..=i],
                    &cloud(2, t_hat.point(i)),
                    &cloud(2, sources.point(i)),
                    &clip,
                )
                .unwrap()
                .1[0]
            })
            .collect();
        assert!(lambdas.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn square_root_kl_bound() {
    let mut rng = common::rng(44);
    let mut checked = 0;
    while checked < 10_000 {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let a = if rng.random_bool(0.05) {
            0.0
        } else {
            scale * rng.random::<f64>()
        };
        let b = if rng.random_bool(0.05) {
            0.0
        } else {
            scale * rng.random::<f64>()
        };
        let lhs = if a == 0.0 {
            b
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln() - a + b
        };
        let rhs = (a.sqrt() - b.sqrt()).powi(2);
        assert!(
            lhs >= rhs - 1e-12 * (1.0 + rhs),
            "a={a} b={b}: {lhs} < {rhs}"
        );
        checked += 1;
    }
}

/// Constant of the pointwise growth-transfer bound on a domain of diameter
/// `diam`: with `E = exp(diam^2 / 4)` bounding the exponential factor and
/// `E * diam / 2` its Lipschitz constant in `T`,
/// `|lambda - lambda0| <= 2 sqrt(w+) E |sqrt(u) - a0| + w+ E diam / 2 |T - T0|`.
fn transfer_constant(w_plus: f64, diam: f64) -> f64 {
    let e2 = (diam * diam / 2.0).exp();
    2.0 * (4.0 * w_plus * e2).max(w_plus * w_plus * diam * diam / 4.0 * e2)
}

#[test]
fn growth_transfer_bound() {
    let mut rng = common::rng(45);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let d = rng.random_range(1..=4);
        let w_minus = rng.random_range(0.01..1.0);
        let w_plus = rng.random_range(1.0..10.0);
        let clip = ClipBounds::new(w_minus, w_plus).unwrap();
        let point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..d).map(|_| rng.random::<f64>()).collect()
        };
        let (x, t, t0) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let w0 = rng.random_range(w_minus..w_plus);
        let u = rng.random_range(0.0..2.0 * w_plus);
        let a0 = w0.sqrt();
        let sq =
            |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let lambda0 = w0 * (sq(&x, &t0) / 4.0).exp();
        let lambda = clip.growth(u, &x, &t);
        let lhs = (lambda - lambda0).powi(2);
        let rhs =
            transfer_constant(w_plus, (d as f64).sqrt()) * ((u.sqrt() - a0).powi(2) + sq(&t, &t0));
        assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{lhs} > {rhs}");
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    assert!(worst > 0.0 && worst <= 1.0);
}

#[test]
fn nearest_neighbor_examples() {
    let rows = RowEstimates {
        t_hat: cloud(1, &[0.25, 0.9]),
        r_hat: vec![0.5, 0.7],
        a_hat: vec![1.0, 1.2],
        lambda_hat: vec![1.5, 2.5],
    };
    let pair = extend_1nn(rows, cloud(1, &[0.2, 0.8])).unwrap();
    assert_eq!(pair.evaluate(&[0.3]).lambda, 1.5);
    assert_eq!(pair.evaluate(&[0.5]).lambda, 1.5);
    assert_eq!(pair.evaluate(&[0.51]).target, vec![0.9]);
}

#[test]
fn nadaraya_watson_limits() {
    let (mu, _, rows) = fitted(46, 12, 12, 2);
    let sources = mu.points().clone();
    let nn = extend_1nn(rows.clone(), sources.clone()).unwrap();
    let tiny = extend_nw(rows.clone(), sources.clone(), NwKernel::Gaussian, 1e-8).unwrap();
    assert_eq!(
        tiny.backing(),
        Backing::NadarayaWatson {
            kernel: NwKernel::Gaussian,
            bandwidth: 1e-8
        }
    );
    let mut rng = common::rng(47);
    let queries = common::random_cloud(&mut rng, 200, 2);
    for x in queries.iter() {
        let (a, b) = (nn.evaluate(x), tiny.evaluate(x));
        assert_eq!(a.target, b.target);
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.active, b.active);
    }

    // one sample: constant output
    let single = RowEstimates {
        t_hat: cloud(2, &[0.4, 0.6]),
        r_hat: vec![0.3],
        a_hat: vec![0.9],
        lambda_hat: vec![1.1],
    };
    for h in [0.01, 0.3, 10.0] {
        let p = extend_nw(
            single.clone(),
            cloud(2, &[0.5, 0.5]),
            NwKernel::Epanechnikov,
            h,
        )
        .unwrap();
        for x in queries.iter().take(20) {
            let v = p.evaluate(x);
            assert_eq!(v.target, vec![0.4, 0.6]);
            assert_eq!((v.lambda, v.active), (1.1, 0.9));
        }
    }

    // identical row estimates at two samples
    let twin = RowEstimates {
        t_hat: cloud(1, &[0.7, 0.7]),
        r_hat: vec![0.2, 0.2],
        a_hat: vec![0.8, 0.8],
        lambda_hat: vec![1.3, 1.3],
    };
    for h in [1e-3, 0.1, 5.0] {
        let p = extend_nw(twin.clone(), cloud(1, &[0.1, 0.9]), NwKernel::Gaussian, h).unwrap();
        for k in 0..=20 {
            let v = p.evaluate(&[k as f64 / 20.0]);
            assert!((v.target[0] - 0.7).abs() < 1e-15);
            assert!((v.lambda - 1.3).abs() < 1e-15 && (v.active - 0.8).abs() < 1e-15);
        }
    }
    assert!(extend_nw(twin, cloud(1, &[0.1, 0.9]), NwKernel::Gaussian, 0.0).is_err());
}

#[test]
fn barycentric_zero_row_convention() {
    let plan = TransportPlan::new(2, 2, vec![0.0, 0.0, 0.3, 0.1]).unwrap();
    let (t, r) = barycentric_rows(&plan, &cloud(1, &[0.35, 0.6]), &cloud(1, &[0.0, 1.0])).unwrap();
    assert_eq!(t.point(0), &[0.35]);
    assert!((t.point(1)[0] - 0.25).abs() < 1e-15);
    assert_eq!(r, vec![0.0, 0.4]);
}
