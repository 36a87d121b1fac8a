//! Per-trial rows, per-size aggregates and their CSV/JSON persistence.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DataMode, ExperimentKind, Targets};
use crate::error::{Error, Result};
use crate::structure::{LearnerConfig, Symmetrization};

/// Columns of `report.csv`, in order.
pub const CSV_COLUMNS: [&str; 6] = ["M", "trial", "success", "fidelity", "l1", "runtime_ms"];

/// One `(sample size, trial)` cell. Metrics that the experiment does not
/// produce are `None`; so are all metrics of a trial that failed, whose
/// message is kept in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    /// Shot count; 0 in infinite-sample mode.
    #[serde(rename = "M")]
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    /// Learned graph equals the true two-hop graph.
    pub success: Option<bool>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Squared overlap with the distribution the shots were drawn from.
    pub fidelity: Option<f64>,
    pub overlap: Option<f64>,
    pub l1: Option<f64>,
    /// Same two metrics against the noise-free distribution.
    pub fidelity_clean: Option<f64>,
    pub l1_clean: Option<f64>,
    /// Realized `L_∞` distance of the magnitude perturbation.
    pub achieved_linf: Option<f64>,
    pub max_conditional_error: Option<f64>,
    pub runtime_ms: u64,
    pub error: Option<String>,
}

impl TrialRow {
    pub fn empty(m: usize, trial: usize, seed: u64) -> Self {
        Self {
            m,
            trial,
            seed,
            success: None,
            precision: None,
            recall: None,
            fidelity: None,
            overlap: None,
            l1: None,
            fidelity_clean: None,
            l1_clean: None,
            achieved_linf: None,
            max_conditional_error: None,
            runtime_ms: 0,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeAggregate {
    #[serde(rename = "M")]
    pub m: usize,
    pub trials: usize,
    pub failed_trials: usize,
    /// Successful trials over all trials (failed ones count as unsuccessful).
    pub success_rate: Option<f64>,
    pub mean_fidelity: Option<f64>,
    /// Sample standard deviation; 0 for a single value.
    pub std_fidelity: Option<f64>,
    pub mean_l1: Option<f64>,
    pub max_conditional_error: Option<f64>,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Groups rows by `M` in order of first appearance.
pub fn aggregate(rows: &[TrialRow]) -> Vec<SizeAggregate> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in rows {
        if !sizes.contains(&r.m) {
            sizes.push(r.m);
        }
    }
    sizes
        .into_iter()
        .map(|m| {
            let cell: Vec<&TrialRow> = rows.iter().filter(|r| r.m == m).collect();
            let has_success = cell.iter().any(|r| r.success.is_some());
            let wins = cell.iter().filter(|r| r.success == Some(true)).count();
            let fid: Vec<f64> = cell.iter().filter_map(|r| r.fidelity).collect();
            let l1: Vec<f64> = cell.iter().filter_map(|r| r.l1).collect();
            let (mean_fidelity, std_fidelity) = mean_std(&fid);
            SizeAggregate {
                m,
                trials: cell.len(),
                failed_trials: cell.iter().filter(|r| r.error.is_some()).count(),
                success_rate: has_success.then(|| wins as f64 / cell.len() as f64),
                mean_fidelity,
                std_fidelity,
                mean_l1: mean_std(&l1).0,
                max_conditional_error: cell.iter().filter_map(|r| r.max_conditional_error).reduce(f64::max),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical TOML rendering of the config.
    pub config_sha256: String,
    pub base_seed: u64,
    pub crate_version: String,
    pub rng: String,
}

/// Settings derived from the model and config before any trial runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSettings {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub d2: usize,
    pub learner: LearnerConfig,
    pub symmetrization: Symmetrization,
    pub eps_inf: Option<f64>,
    pub rho: Option<f64>,
    /// 1-based, as in the config.
    pub partial_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub experiment: ExperimentKind,
    pub mode: DataMode,
    pub provenance: Provenance,
    pub settings: ResolvedSettings,
    pub targets: Targets,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<SizeAggregate>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Hex SHA-256 of the JSON report with every `runtime_ms` zeroed; equal
    /// for reruns of the same config.
    pub fn digest(&self) -> Result<String> {
        let mut stable = self.clone();
        stable.rows.iter_mut().for_each(|r| r.runtime_ms = 0);
        Ok(format!("{:x}", Sha256::digest(serde_json::to_vec(&stable)?)))
    }

    /// Writes the fixed CSV columns. Missing values are empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(CSV_COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.m.to_string(),
                r.trial.to_string(),
                opt(r.success),
                opt(r.fidelity),
                opt(r.l1),
                r.runtime_ms.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `report.json` and `report.csv` into `dir` and returns both paths.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join("report.json");
        let csv = dir.join("report.csv");
        std::fs::write(&json, self.to_json()?)?;
        self.write_csv(std::fs::File::create(&csv)?)?;
        Ok((json, csv))
    }

    pub fn summary_line(&self) -> String {
        let last = self.aggregates.last();
        let mut s = format!("{:?} experiment '{}': {} rows", self.experiment, self.name, self.rows.len());
        if let Some(a) = last {
            s.push_str(&format!(", M={}", a.m));
            if let Some(r) = a.success_rate {
                s.push_str(&format!(" success_rate={r:.3}"));
            }
            if let Some(f) = a.mean_fidelity {
                s.push_str(&format!(" mean_fidelity={f:.5}"));
            }
            if let Some(e) = a.max_conditional_error {
                s.push_str(&format!(" max_conditional_error={e:.4}"));
            }
        }
        s
    }
}
