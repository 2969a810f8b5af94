//! Serializable report documents.
//!
//! Each subcommand writes exactly one of these as its primary JSON artifact
//! and prints the same document to stdout. All fields are deterministic
//! functions of the inputs except the wall-time fields (`wall_time_s`,
//! `tune_wall_time_s`, `runtime_s`), which measure the host.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// Resolved waveform echo; `energy_peak_s` and `energy_peak_sample` locate
/// the discrete energy maximum for later `eval_times` choices.
#[derive(Debug, Clone, Serialize)]
pub struct WaveformEcho {
    pub freq_hz: f64,
    pub peak_time_s: f64,
    pub energy_peak_s: f64,
    pub energy_peak_sample: usize,
    pub decay_s: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceEcho {
    pub dipoles: Vec<usize>,
    /// Unit orientation after normalization.
    pub orientation: [f64; 3],
    pub waveform: WaveformEcho,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorEcho {
    /// `"generated"` or `"file"`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cond: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateFiles {
    /// Present only when the operator was generated (and therefore written).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    pub b_true: String,
    pub y: String,
    pub geometry: String,
}

/// `simulate`'s scenario echo: the fully resolved scenario plus what was
/// actually achieved and written.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioEcho {
    pub n_sensors: usize,
    pub n_dipoles: usize,
    pub n_timepoints: usize,
    pub sample_rate_hz: f64,
    pub sources: Vec<SourceEcho>,
    /// `null` means noiseless.
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
    pub operator: OperatorEcho,
    /// Ratio measured on the written data; `null` when noiseless.
    pub achieved_snr_db: Option<f64>,
    pub files: SimulateFiles,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage1Echo {
    /// `"exact"` or `"ridge"`.
    pub kind: String,
    pub ridge_lambda: f64,
    pub effective_rank: usize,
    pub rank_tol: f64,
}

/// `reconstruct`'s diagnostics document.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub method: String,
    /// `null` when the method has no spatial penalty.
    pub mu1: Option<f64>,
    /// `null` when the method has no temporal penalty.
    pub mu2: Option<f64>,
    pub q: Option<usize>,
    pub stage1: Stage1Echo,
    pub iterations_run: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub sparsity_trace: Vec<f64>,
    pub ortho_error_trace: Vec<f64>,
    pub wall_time_s: f64,
    pub files: ReconstructFiles,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructFiles {
    pub b_est: String,
}

/// `tune`'s report; `cv_scores` is fold-major (`K` rows, one per fold).
#[derive(Debug, Clone, Serialize)]
pub struct TuningReport {
    pub mu1_grid: Vec<f64>,
    pub cv_scores: Vec<Vec<f64>>,
    pub mu1_star: f64,
    /// `(mu2, score)` pairs sorted by `mu2`.
    pub gcv_samples: Vec<(f64, f64)>,
    pub mu2_star: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyTable {
    #[serde(rename = "true")]
    pub truth: Vec<f64>,
    pub est: Vec<f64>,
}

/// `evaluate`'s report.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationJson {
    pub mse: f64,
    /// Peak localization distance keyed by time index.
    pub peak_distances: BTreeMap<usize, f64>,
    pub sparsity: f64,
    /// Per-dipole energy at each requested time.
    pub energy: BTreeMap<usize, EnergyTable>,
    pub runtime_s: f64,
}

/// One (run, method) cell of a comparison; failures are recorded, not fatal.
#[derive(Debug, Clone, Serialize)]
pub struct CompareCell {
    pub run: usize,
    pub seed: u64,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub mse: Option<f64>,
    pub peak_distances: BTreeMap<usize, f64>,
    pub sparsity: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub tune_wall_time_s: Option<f64>,
}

/// Mean or standard-error row of the comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct CompareStats {
    pub mse: f64,
    pub peak_distances: BTreeMap<usize, f64>,
    pub sparsity: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub cells: Vec<CompareCell>,
    /// `null` when every run failed.
    pub mean: Option<CompareStats>,
    /// Standard errors (0 with a single surviving run).
    pub se: Option<CompareStats>,
    pub n_failed: usize,
}

/// `compare`'s report.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub snr_db: Option<f64>,
    pub eval_times: Vec<usize>,
    pub tuned: bool,
    pub results: Vec<MethodSummary>,
    pub wall_time_s: f64,
}

/// Pretty JSON with a trailing newline, identical on stdout and on disk.
pub fn to_pretty(value: &impl Serialize) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes a report document to `dir/name`.
pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<String, CliError> {
    let text = to_pretty(value)?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(name.to_string())
}
