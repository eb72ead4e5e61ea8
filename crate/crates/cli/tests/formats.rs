use std::fs;

use ghuot::kernel_estimator::GridPotentials;
use ghuot::measures::{DiscreteMeasure, GridMeasure, PointCloud};
use ghuot::plan_estimator::ClipBounds;
use ghuot::uot::{solve_discrete_uot, SolverConfig};
use ghuot::{evaluate_pair, PairValue};
use ghuot_cli::formats::{
    read_grid, read_json, read_plan_entries, read_sample_table, read_samples, sidecar_path,
    write_grid, write_grid_potentials, write_pair_table, write_plan, write_points_with_meta,
    write_potentials, write_samples, GridDescriptor, PlanSummary, PLAN_EXPORT_FLOOR,
};
use ghuot_cli::CliError;
use proptest::prelude::*;

fn measure(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> DiscreteMeasure {
    DiscreteMeasure::new(PointCloud::new(dim, coords).unwrap(), weights).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_samples_round_trip(
        dim in 1usize..4,
        atoms in prop::collection::vec((prop::collection::vec(0.0f64..=1.0, 3), 1e-6f64..10.0), 1..30),
    ) {
        let coords: Vec<f64> = atoms.iter().flat_map(|(p, _)| p[..dim].to_vec()).collect();
        let weights: Vec<f64> = atoms.iter().map(|(_, w)| *w).collect();
        let m = measure(dim, coords, weights);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_samples(&path, &m).unwrap();
        let back = read_samples(&path, None).unwrap();
        prop_assert_eq!(back, m);
    }
}

#[test]
fn sidecar_supplies_uniform_weights() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    let points = PointCloud::new(2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
    write_points_with_meta(&path, &points, 2.5).unwrap();
    assert_eq!(sidecar_path(&path), dir.path().join("x.json"));
    let m = read_samples(&path, None).unwrap();
    assert_eq!(m.points(), &points);
    assert_eq!(m.weights(), &[0.625; 4]);
    let table = read_sample_table(&path).unwrap();
    assert!(table.weights.is_none());
}

#[test]
fn sample_table_skips_comments_and_trims() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    fs::write(
        &path,
        "# generated\nx0, weight\n0.25, 1.5\n# mid\n 0.75 ,0.5\n",
    )
    .unwrap();
    let m = read_samples(&path, None).unwrap();
    assert_eq!(m.points().coords(), &[0.25, 0.75]);
    assert_eq!(m.weights(), &[1.5, 0.5]);
}

#[test]
fn malformed_samples_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("a,b\n0.1,0.2\n", "no coordinate header"),
        ("x0,weight\nzz,1\n", "unparsable value"),
        ("x0,weight\n0.5\n", "missing column"),
    ];
    for (k, (text, what)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{k}.csv"));
        fs::write(&path, text).unwrap();
        assert!(
            matches!(read_samples(&path, None), Err(CliError::Format { .. })),
            "{what}"
        );
    }
    // out-of-domain coordinates are rejected by the core types
    let path = dir.path().join("far.csv");
    fs::write(&path, "x0,weight\n1.5,1\n").unwrap();
    assert!(matches!(read_samples(&path, None), Err(CliError::Core(_))));
    // missing sidecar
    let path = dir.path().join("lonely.csv");
    fs::write(&path, "x0\n0.5\n").unwrap();
    assert!(matches!(
        read_samples(&path, None),
        Err(CliError::Io { .. })
    ));
}

#[test]
fn sidecar_dimension_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(&path, "x0\n0.5\n").unwrap();
    fs::write(sidecar_path(&path), r#"{"mass": 1.0, "dim": 2}"#).unwrap();
    assert!(matches!(
        read_samples(&path, None),
        Err(CliError::Format { .. })
    ));
}

#[test]
fn grid_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let values: Vec<f64> = (0..16)
        .map(|k| 0.5 + (k as f64 * 0.37).sin().abs())
        .collect();
    let grid = GridMeasure::normalized(2, 4, values, 1.7).unwrap();
    write_grid(&path, &grid).unwrap();
    assert_eq!(read_grid(&path).unwrap(), grid);
}

#[test]
fn plan_and_potentials_export() {
    let dir = tempfile::tempdir().unwrap();
    let mu = measure(1, vec![0.1, 0.4, 0.9], vec![0.5, 0.3, 0.2]);
    let nu = measure(1, vec![0.2, 0.8], vec![1.0, 1.5]);
    let sol = solve_discrete_uot(&mu, &nu, &SolverConfig::default()).unwrap();
    let (csv, json) = (dir.path().join("plan.csv"), dir.path().join("plan.json"));
    write_plan(&csv, &json, &sol).unwrap();

    let back = read_plan_entries(&csv, 3, 2).unwrap();
    for i in 0..3 {
        for (a, b) in back.row(i).iter().zip(sol.plan.row(i)) {
            if *b > PLAN_EXPORT_FLOOR {
                assert_eq!(a, b);
            } else {
                assert_eq!(*a, 0.0);
            }
        }
    }
    let summary: PlanSummary = read_json(&json).unwrap();
    assert_eq!(summary.primal, sol.primal_value);
    assert_eq!(summary.dual, sol.dual_value);
    assert!((summary.row_mass - sol.plan.row_marginals().iter().sum::<f64>()).abs() < 1e-15);
    assert!(matches!(
        read_plan_entries(&csv, 1, 1),
        Err(CliError::Format { .. })
    ));

    let (phi, psi) = (dir.path().join("phi.csv"), dir.path().join("psi.csv"));
    write_potentials(&phi, &psi, &sol.potentials).unwrap();
    let text = fs::read_to_string(&phi).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,phi"));
    for (k, line) in lines.enumerate() {
        let (idx, v) = line.split_once(',').unwrap();
        assert_eq!(idx.parse::<usize>().unwrap(), k);
        assert_eq!(v.parse::<f64>().unwrap(), sol.potentials.phi[k]);
    }
}

#[test]
fn grid_potentials_and_pair_table() {
    let dir = tempfile::tempdir().unwrap();
    let phi: Vec<f64> = (0..4).map(|k| 0.1 * k as f64).collect();
    let psi: Vec<f64> = (0..4).map(|k| -0.05 * k as f64).collect();
    let pot = GridPotentials::new(1, 4, phi.clone(), psi.clone(), ClipBounds::default()).unwrap();
    let (csv, json) = (dir.path().join("pot.csv"), dir.path().join("pot.json"));
    write_grid_potentials(&csv, &json, &pot).unwrap();
    let desc: GridDescriptor = read_json(&json).unwrap();
    assert_eq!((desc.dim, desc.resolution), (1, 4));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("cell_index,phi,psi\n"));
    assert_eq!(text.lines().count(), 5);

    let queries = PointCloud::new(1, vec![0.0, 0.3, 1.0]).unwrap();
    let values: Vec<PairValue> = evaluate_pair(&pot, &queries);
    let path = dir.path().join("pair.csv");
    write_pair_table(&path, &queries, &values).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x0,t0,lambda,a"));
    for (line, v) in lines.zip(&values) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[1], v.target[0]);
        assert_eq!(cols[2], v.lambda);
        assert_eq!(cols[3], v.active);
    }
}
