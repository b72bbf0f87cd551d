use std::collections::BTreeMap;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trial at one grid point. The schema is shared by every experiment;
/// columns that do not apply are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub experiment: String,
    pub grid_index: usize,
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub mu: usize,
    pub k: usize,
    pub s: usize,
    pub snr_db: f64,
    pub gamma: Option<f64>,
    pub deviation_snr_db: Option<f64>,
    pub mode: Option<String>,
    /// Normalized RMSE: Alice vs Bob for protocol runs, Eve vs Alice for attacks.
    pub rmse: Option<f64>,
    /// Eve vs Bob (attacks only).
    pub rmse_bob: Option<f64>,
    /// Protocol: quantized secrets identical. Attack: Eve within tolerance.
    pub success: bool,
    pub support_correct: Option<bool>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    /// The solver or secret computation failed numerically.
    pub diverged: bool,
    pub error: Option<String>,
}

/// Wall-clock time per trial, kept apart so result files stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub grid_index: usize,
    pub trial: usize,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub grid_index: usize,
    pub n: usize,
    pub mu: usize,
    pub k: usize,
    pub s: usize,
    pub snr_db: f64,
    pub gamma: Option<f64>,
    pub deviation_snr_db: Option<f64>,
    pub mode: Option<String>,
    pub trials: usize,
    /// Over trials that did not diverge.
    pub mean_rmse: Option<f64>,
    pub stderr_rmse: Option<f64>,
    pub mean_mse: Option<f64>,
    pub mean_rmse_bob: Option<f64>,
    pub success_rate: f64,
    pub failure_rate: f64,
}

fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Per-grid-point statistics; a pure function of the rows.
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<usize, Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.grid_index).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(grid_index, rs)| {
            let first = rs[0];
            let ok: Vec<&&TrialRow> = rs.iter().filter(|r| !r.diverged).collect();
            let rmse: Vec<f64> = ok.iter().filter_map(|r| r.rmse).filter(|v| v.is_finite()).collect();
            let mse: Vec<f64> = rmse.iter().map(|v| v * v).collect();
            let bob: Vec<f64> = ok.iter().filter_map(|r| r.rmse_bob).filter(|v| v.is_finite()).collect();
            let (mean_rmse, stderr_rmse) = mean_stderr(&rmse);
            let trials = rs.len();
            SummaryRow {
                grid_index,
                n: first.n,
                mu: first.mu,
                k: first.k,
                s: first.s,
                snr_db: first.snr_db,
                gamma: first.gamma,
                deviation_snr_db: first.deviation_snr_db,
                mode: first.mode.clone(),
                trials,
                mean_rmse,
                stderr_rmse,
                mean_mse: mean_stderr(&mse).0,
                mean_rmse_bob: mean_stderr(&bob).0,
                success_rate: rs.iter().filter(|r| r.success).count() as f64 / trials as f64,
                failure_rate: rs.iter().filter(|r| r.diverged).count() as f64 / trials as f64,
            }
        })
        .collect()
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// Reads a trial CSV; an empty file is an error.
pub fn read_rows(path: &Path) -> Result<Vec<TrialRow>> {
    let rows: Vec<TrialRow> = read_csv(path)?;
    if rows.is_empty() {
        return Err(Error::Empty(format!("no trial rows in {}", path.display())));
    }
    Ok(rows)
}
