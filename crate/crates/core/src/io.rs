//! CSV and JSON persistence for datasets, chains and reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::Dataset;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.display().to_string(), source }
}

/// Metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D0")]
    pub d0: usize,
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub alpha: Option<f64>,
    pub dim: usize,
}

/// Path of the sidecar belonging to a dataset CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `x` (or `x1,x2`) and `y` columns plus the JSON sidecar.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header: Vec<String> =
        if data.dim == 1 { vec!["x".into()] } else { (1..=data.dim).map(|i| format!("x{i}")).collect() };
    header.push("y".into());
    w.write_record(&header).map_err(csv_err(path))?;
    for (x, y) in data.points.iter().zip(&data.y) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(y.to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    let sidecar = DatasetSidecar {
        n: data.len(),
        d0: data.theta0.len(),
        seed: data.seed,
        theta0: data.theta0.clone(),
        alpha: data.alpha,
        dim: data.dim,
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let sidecar: DatasetSidecar = read_json(&sidecar_path(path))?;
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut points = Vec::with_capacity(sidecar.n);
    let mut y = Vec::with_capacity(sidecar.n);
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        if vals.len() != sidecar.dim + 1 {
            return Err(Error::DimensionMismatch { expected: sidecar.dim + 1, got: vals.len() });
        }
        points.push(vals[..sidecar.dim].to_vec());
        y.push(vals[sidecar.dim]);
    }
    let data =
        Dataset { dim: sidecar.dim, points, y, theta0: sidecar.theta0, seed: sidecar.seed, alpha: sidecar.alpha };
    data.validate()?;
    if data.len() != sidecar.n {
        return Err(Error::DimensionMismatch { expected: sidecar.n, got: data.len() });
    }
    Ok(data)
}

/// Writes a matrix as CSV with columns `theta_1 … theta_D`.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, prefix: &str) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let header: Vec<String> = (1..=m.ncols()).map(|k| format!("{prefix}_{k}")).collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| Error::Json { path: path.display().to_string(), source })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|source| Error::Json { path: path.display().to_string(), source })
}
