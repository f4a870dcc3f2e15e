use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::TrajectoryRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RunStatus {
    Ok,
    StationaryAtInit,
    DivergenceDetected,
}

/// One line of the results CSV. Field order is the column order.
///
/// Rows whose status is not `Ok` leave every metric cell empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub algorithm: String,
    pub problem: String,
    pub dim: usize,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub t: u64,
    pub repetition: u32,
    pub seed: u64,
    pub status: RunStatus,
    pub stationarity_metric: Option<f64>,
    pub grad_norm_at_output: Option<f64>,
    /// 0-based position of `x̄_T` among `x_1, …, x_T`.
    pub output_index: Option<usize>,
    pub oracle_calls: u64,
    pub wall_ms: Option<f64>,
    /// Learning-rate knob of the run; used for ordering, not written.
    #[serde(skip)]
    pub learning_rate: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

/// First 16 hex digits of the SHA-256 of `canonical`.
pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Sorts by `(algorithm, problem, T, repetition)`, then learning rate and
/// hash, so the file does not depend on execution order.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(compare_rows);
}

pub fn compare_rows(a: &ResultRow, b: &ResultRow) -> std::cmp::Ordering {
    (&a.algorithm, &a.problem, a.t, a.repetition)
        .cmp(&(&b.algorithm, &b.problem, b.t, b.repetition))
        .then(a.learning_rate.total_cmp(&b.learning_rate))
        .then(a.config_hash.cmp(&b.config_hash))
}

const COLUMNS: [&str; 14] = [
    "config_hash",
    "algorithm",
    "problem",
    "dim",
    "sigma",
    "T",
    "repetition",
    "seed",
    "status",
    "stationarity_metric",
    "grad_norm_at_output",
    "output_index",
    "oracle_calls",
    "wall_ms",
];

/// Writes `rows` (sorted) with a header line; an empty slice gives a
/// header-only file.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(COLUMNS)?;
    for r in &sorted {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TrajectoryLine {
    t: u64,
    eta: f64,
    a: f64,
    norm_d_sq: f64,
    norm_exact_grad_sq: f64,
    norm_eps_sq: f64,
}

/// Per-iterate dump with columns `t, eta, a, norm_d_sq, norm_exact_grad_sq,
/// norm_eps_sq`.
pub fn write_trajectory(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["t", "eta", "a", "norm_d_sq", "norm_exact_grad_sq", "norm_eps_sq"])?;
    for r in records {
        w.serialize(TrajectoryLine {
            t: r.t,
            eta: r.eta,
            a: r.a,
            norm_d_sq: r.norm_d_sq,
            norm_exact_grad_sq: r.norm_exact_grad_sq,
            norm_eps_sq: r.norm_eps_sq,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
