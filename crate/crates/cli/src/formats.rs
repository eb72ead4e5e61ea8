//! On-disk formats: sample CSVs with JSON sidecars, grid-measure JSON, plan
//! and potential exports, and fitted-pair tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ghuot::kernel_estimator::GridPotentials;
use ghuot::measures::{DiscreteMeasure, GridMeasure, PointCloud};
use ghuot::uot::{DualPotentials, TransportPlan, UotSolution};
use ghuot::PairValue;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Plan entries at or below this are omitted from the CSV export.
pub const PLAN_EXPORT_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub mass: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub dim: usize,
    pub resolution: usize,
    pub mass: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub primal: f64,
    pub dual: f64,
    pub eps_final: f64,
    pub row_mass: f64,
    pub col_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub dim: usize,
    pub resolution: usize,
}

/// `samples.csv` -> `samples.json`
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::format(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::format(path, e))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| CliError::format(path, e))
}

/// Point coordinates and the optional `weight` column of a sample CSV.
pub struct SampleTable {
    pub points: PointCloud,
    pub weights: Option<Vec<f64>>,
}

pub fn read_sample_table(path: &Path) -> Result<SampleTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::format(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::format(path, e))?
        .clone();
    let mut dim = 0;
    while headers.get(dim) == Some(format!("x{dim}").as_str()) {
        dim += 1;
    }
    if dim == 0 {
        return Err(CliError::format(
            path,
            "expected header x0,...,x{d-1}[,weight]",
        ));
    }
    let weight_col = headers.iter().position(|h| h == "weight");
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::format(path, e))?;
        let parse = |k: usize| -> Result<f64> {
            record
                .get(k)
                .ok_or_else(|| CliError::format(path, format!("row {row}: missing column {k}")))?
                .parse::<f64>()
                .map_err(|e| CliError::format(path, format!("row {row}: {e}")))
        };
        for k in 0..dim {
            coords.push(parse(k)?);
        }
        if let Some(w) = weight_col {
            weights.push(parse(w)?);
        }
    }
    let points = PointCloud::new(dim, coords)?;
    Ok(SampleTable {
        points,
        weights: weight_col.map(|_| weights),
    })
}

/// Loads a weighted measure. Without a `weight` column every atom gets
/// `mass / n`, with the mass read from the JSON sidecar.
pub fn read_samples(path: &Path, meta: Option<&Path>) -> Result<DiscreteMeasure> {
    let table = read_sample_table(path)?;
    let weights = match table.weights {
        Some(w) => w,
        None => {
            let meta_path = meta
                .map(Path::to_path_buf)
                .unwrap_or_else(|| sidecar_path(path));
            let meta: SampleMeta = read_json(&meta_path)?;
            if meta.dim != table.points.dim() {
                return Err(CliError::format(
                    &meta_path,
                    format!(
                        "dim {} does not match {} columns",
                        meta.dim,
                        table.points.dim()
                    ),
                ));
            }
            let n = table.points.len();
            if n == 0 {
                return Err(ghuot::Error::EmptySample.into());
            }
            vec![meta.mass / n as f64; n]
        }
    };
    Ok(DiscreteMeasure::new(table.points, weights)?)
}

fn coordinate_header(prefix: char, dim: usize) -> Vec<String> {
    (0..dim).map(|k| format!("{prefix}{k}")).collect()
}

pub fn write_samples(path: &Path, measure: &DiscreteMeasure) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = coordinate_header('x', measure.dim());
    header.push("weight".into());
    w.write_record(&header)
        .map_err(|e| CliError::format(path, e))?;
    for (p, wt) in measure.points().iter().zip(measure.weights()) {
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        row.push(wt.to_string());
        w.write_record(&row)
            .map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes points without weights plus the `{mass, dim}` sidecar.
pub fn write_points_with_meta(path: &Path, points: &PointCloud, mass: f64) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(coordinate_header('x', points.dim()))
        .map_err(|e| CliError::format(path, e))?;
    for p in points.iter() {
        w.write_record(p.iter().map(|v| v.to_string()))
            .map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &SampleMeta {
            mass,
            dim: points.dim(),
        },
    )
}

pub fn write_grid(path: &Path, grid: &GridMeasure) -> Result<()> {
    write_json(
        path,
        &GridFile {
            dim: grid.dim(),
            resolution: grid.resolution(),
            mass: grid.mass(),
            density: grid.density().to_vec(),
        },
    )
}

pub fn read_grid(path: &Path) -> Result<GridMeasure> {
    let f: GridFile = read_json(path)?;
    Ok(GridMeasure::new(f.dim, f.resolution, f.density, f.mass)?)
}

pub fn write_plan(csv_path: &Path, json_path: &Path, solution: &UotSolution) -> Result<()> {
    write_plan_entries(csv_path, &solution.plan)?;
    write_json(
        json_path,
        &PlanSummary {
            primal: solution.primal_value,
            dual: solution.dual_value,
            eps_final: solution.eps_final,
            row_mass: solution.plan.row_marginals().iter().sum(),
            col_mass: solution.plan.col_marginals().iter().sum(),
        },
    )
}

fn write_plan_entries(path: &Path, plan: &TransportPlan) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["i", "j", "gamma"])
        .map_err(|e| CliError::format(path, e))?;
    for i in 0..plan.rows() {
        for (j, &g) in plan.row(i).iter().enumerate() {
            if g > PLAN_EXPORT_FLOOR {
                w.write_record([i.to_string(), j.to_string(), g.to_string()])
                    .map_err(|e| CliError::format(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_plan_entries(path: &Path, rows: usize, cols: usize) -> Result<TransportPlan> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    let mut gamma = vec![0.0; rows * cols];
    for record in reader.deserialize::<(usize, usize, f64)>() {
        let (i, j, g) = record.map_err(|e| CliError::format(path, e))?;
        if i >= rows || j >= cols {
            return Err(CliError::format(
                path,
                format!("entry ({i}, {j}) out of range"),
            ));
        }
        gamma[i * cols + j] = g;
    }
    Ok(TransportPlan::new(rows, cols, gamma)?)
}

fn write_indexed(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", name])
        .map_err(|e| CliError::format(path, e))?;
    for (k, v) in values.iter().enumerate() {
        w.write_record([k.to_string(), v.to_string()])
            .map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_potentials(
    phi_path: &Path,
    psi_path: &Path,
    potentials: &DualPotentials,
) -> Result<()> {
    write_indexed(phi_path, "phi", &potentials.phi)?;
    write_indexed(psi_path, "psi", &potentials.psi)
}

pub fn write_grid_potentials(
    csv_path: &Path,
    json_path: &Path,
    pot: &GridPotentials,
) -> Result<()> {
    let mut w = csv_writer(csv_path)?;
    w.write_record(["cell_index", "phi", "psi"])
        .map_err(|e| CliError::format(csv_path, e))?;
    for (k, (p, q)) in pot.phi().iter().zip(pot.psi()).enumerate() {
        w.write_record([k.to_string(), p.to_string(), q.to_string()])
            .map_err(|e| CliError::format(csv_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(csv_path, e))?;
    write_json(
        json_path,
        &GridDescriptor {
            dim: ghuot::TransportGrowth::dim(pot),
            resolution: pot.resolution(),
        },
    )
}

/// `x0..x{d-1}, t0..t{d-1}, lambda, a` per query.
pub fn write_pair_table(path: &Path, queries: &PointCloud, values: &[PairValue]) -> Result<()> {
    let d = queries.dim();
    let mut w = csv_writer(path)?;
    let mut header = coordinate_header('x', d);
    header.extend(coordinate_header('t', d));
    header.push("lambda".into());
    header.push("a".into());
    w.write_record(&header)
        .map_err(|e| CliError::format(path, e))?;
    for (x, v) in queries.iter().zip(values) {
        let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        row.extend(v.target.iter().map(|c| c.to_string()));
        row.push(v.lambda.to_string());
        row.push(v.active.to_string());
        w.write_record(&row)
            .map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
