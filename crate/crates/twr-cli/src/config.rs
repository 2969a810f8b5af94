//! JSON run configurations and command-line overrides.
//!
//! Every subcommand takes `--config <path.json>` holding one of the structs
//! below. A handful of flags (`--mu1`, `--mu2`, `--method`, `--snr-db`,
//! `--seed`, `--out`) override the corresponding config fields; flags win.
//! Field defaults equal the library defaults, so an empty `solver` or
//! `tuning` object is valid.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;
use twr_core::simulate::{ActiveSet, ScenarioSpec, SourceWaveformSpec};
use twr_core::solver::SolverOptions;
use twr_core::stage1::DEFAULT_RANK_TOL;
use twr_core::tuning::{CvSpec, GcvSpec};

fn default_out() -> String {
    ".".to_string()
}

fn default_cond() -> f64 {
    50.0
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_sample_rate() -> f64 {
    1.0
}

fn default_method() -> String {
    "twr".to_string()
}

fn default_methods() -> Vec<String> {
    vec!["mne".to_string(), "twr".to_string()]
}

fn default_n_runs() -> usize {
    1
}

/// The reconstruction methods the CLI can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    /// Minimum-norm estimate only (ridge-regularized when
    /// `ridge_lambda > 0`).
    Mne,
    /// Exact minimum norm followed by the two-way fit.
    Twr,
    /// Exact minimum norm followed by the temporal-only fit.
    Towr,
    /// Exact minimum norm followed by the spatial-only fit.
    Sowr,
    /// Ridge minimum norm followed by the two-way fit.
    MneTwr,
    /// Ridge minimum norm followed by the spatial-only fit.
    MneSowr,
}

impl MethodKind {
    pub fn parse(token: &str) -> Result<Self, CliError> {
        match token {
            "mne" => Ok(MethodKind::Mne),
            "twr" => Ok(MethodKind::Twr),
            "towr" => Ok(MethodKind::Towr),
            "sowr" => Ok(MethodKind::Sowr),
            "mne+twr" => Ok(MethodKind::MneTwr),
            "mne+sowr" => Ok(MethodKind::MneSowr),
            other => Err(CliError::Config(format!(
                "unknown method {other:?}; valid: mne, twr, towr, sowr, mne+twr, mne+sowr"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Mne => "mne",
            MethodKind::Twr => "twr",
            MethodKind::Towr => "towr",
            MethodKind::Sowr => "sowr",
            MethodKind::MneTwr => "mne+twr",
            MethodKind::MneSowr => "mne+sowr",
        }
    }

    /// Whether the first stage uses the ridge inverse.
    pub fn ridge_stage1(&self) -> bool {
        matches!(self, MethodKind::MneTwr | MethodKind::MneSowr)
    }
}

/// Seeded random forward operator with a prescribed condition number.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default = "default_cond")]
    pub cond: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Damped sinusoid; give exactly one of `peak_time_s` (envelope center) or
/// `energy_peak_s` (where `|w|` is largest).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub freq_hz: f64,
    pub decay_s: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub peak_time_s: Option<f64>,
    #[serde(default)]
    pub energy_peak_s: Option<f64>,
}

impl WaveformConfig {
    pub fn resolve(&self) -> Result<SourceWaveformSpec, CliError> {
        match (self.peak_time_s, self.energy_peak_s) {
            (Some(t), None) => Ok(SourceWaveformSpec::sine_exponential(
                self.freq_hz,
                t,
                self.decay_s,
                self.amplitude,
            )),
            (None, Some(t)) => Ok(SourceWaveformSpec::with_energy_peak_at(
                t,
                self.freq_hz,
                self.decay_s,
                self.amplitude,
            )),
            _ => Err(CliError::Config(
                "waveform needs exactly one of peak_time_s or energy_peak_s".to_string(),
            )),
        }
    }
}

/// One active dipole group. `direction` is normalized internally.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub dipoles: Vec<usize>,
    pub direction: [f64; 3],
    pub waveform: WaveformConfig,
}

impl SourceConfig {
    pub fn resolve(&self) -> Result<ActiveSet, CliError> {
        let waveform = self.waveform.resolve()?;
        Ok(ActiveSet::with_direction(
            self.dipoles.clone(),
            self.direction,
            waveform,
        )?)
    }
}

/// Scenario description: sizes, sampling, sources, noise.
/// `snr_db: null` (or absent) means noiseless.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_sensors: usize,
    pub n_dipoles: usize,
    pub n_timepoints: usize,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub noise_seed: u64,
}

impl ScenarioConfig {
    pub fn resolve(&self) -> Result<ScenarioSpec, CliError> {
        let active_sets = self
            .sources
            .iter()
            .map(SourceConfig::resolve)
            .collect::<Result<Vec<_>, _>>()?;
        let spec = ScenarioSpec {
            n_sensors: self.n_sensors,
            n_dipoles: self.n_dipoles,
            n_timepoints: self.n_timepoints,
            sample_rate_hz: self.sample_rate_hz,
            active_sets,
            snr_db: self.snr_db.unwrap_or(f64::INFINITY),
            noise_seed: self.noise_seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Stage-1 and stage-2 knobs; unset fields take the library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub mu1: f64,
    pub mu2: f64,
    pub q: Option<usize>,
    pub max_iter: Option<usize>,
    pub rel_tol: Option<f64>,
    /// Stage-1 ridge weight; used only by `mne`, `mne+twr`, `mne+sowr`.
    pub ridge_lambda: f64,
    pub rank_tol: Option<f64>,
}

impl SolverConfig {
    pub fn to_options(&self) -> SolverOptions {
        let defaults = SolverOptions::default();
        SolverOptions {
            mu1: self.mu1,
            mu2: self.mu2,
            q: self.q,
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            rel_tol: self.rel_tol.unwrap_or(defaults.rel_tol),
        }
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol.unwrap_or(DEFAULT_RANK_TOL)
    }
}

/// Cross-validation and GCV knobs; unset fields take the library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningConfig {
    pub k: Option<usize>,
    pub fold_seed: u64,
    pub mu1_grid: Option<Vec<f64>>,
    pub mu2_lo: Option<f64>,
    pub mu2_hi: Option<f64>,
    pub gcv_tol: Option<f64>,
    pub gcv_max_evals: Option<usize>,
    pub entrywise_trace: bool,
    pub passes: Option<usize>,
}

impl TuningConfig {
    pub fn cv_spec(&self) -> CvSpec {
        let defaults = CvSpec::default();
        CvSpec {
            k: self.k.unwrap_or(defaults.k),
            mu1_grid: self.mu1_grid.clone().unwrap_or(defaults.mu1_grid),
            fold_seed: self.fold_seed,
        }
    }

    pub fn gcv_spec(&self) -> GcvSpec {
        let defaults = GcvSpec::default();
        GcvSpec {
            mu2_lo: self.mu2_lo.unwrap_or(defaults.mu2_lo),
            mu2_hi: self.mu2_hi.unwrap_or(defaults.mu2_hi),
            tol: self.gcv_tol.unwrap_or(defaults.tol),
            max_evals: self.gcv_max_evals.unwrap_or(defaults.max_evals),
            entrywise_trace: self.entrywise_trace,
        }
    }

    pub fn passes(&self) -> usize {
        self.passes
            .unwrap_or(twr_core::tuning::TuneOptions::default().outer_passes)
    }
}

/// `twr simulate`: build `X` (or load it), the truth, and noisy data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub operator: Option<OperatorConfig>,
    #[serde(default)]
    pub x_path: Option<String>,
    #[serde(default = "default_out")]
    pub out: String,
}

/// `twr reconstruct`: invert one data set with one method.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub x: String,
    pub y: String,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_out")]
    pub out: String,
}

/// `twr tune`: select `mu1` by K-fold CV and `mu2` by GCV.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub geometry: Option<String>,
    #[serde(default = "default_out")]
    pub out: String,
}

/// `twr evaluate`: score an estimate against the truth.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub b_true: String,
    pub b_est: String,
    #[serde(default)]
    pub geometry: Option<String>,
    #[serde(default)]
    pub eval_times: Vec<usize>,
    #[serde(default)]
    pub zero_tol: f64,
    #[serde(default = "default_out")]
    pub out: String,
}

/// `twr compare`: re-simulate noise `n_runs` times and score each method.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub b_true: String,
    #[serde(default)]
    pub x: Option<String>,
    #[serde(default)]
    pub operator: Option<OperatorConfig>,
    #[serde(default)]
    pub n_sensors: Option<usize>,
    #[serde(default)]
    pub geometry: Option<String>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// `null` or absent means noiseless replicates.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub eval_times: Vec<usize>,
    #[serde(default)]
    pub zero_tol: f64,
    /// Re-tune the penalty weights on every run (CV for the spatial weight,
    /// GCV for the temporal one, each method using the criteria that apply
    /// to it).
    #[serde(default)]
    pub tune: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_out")]
    pub out: String,
}

/// Loads one command's config from a JSON file.
pub fn load_config<T: DeserializeOwned>(path: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {path}: {e}")))
}

/// Fails fast when an input path does not exist; later reads report I/O
/// errors, but a missing input is a configuration mistake.
pub fn require_file(path: &str) -> Result<(), CliError> {
    if Path::new(path).is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("input file not found: {path}")))
    }
}

/// Command-line overrides; flags win over config fields.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<String>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub method: Option<String>,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

impl Overrides {
    /// Rejects overrides the given command cannot use.
    pub fn reject_unused(&self, command: &str, unused: &[&str]) -> Result<(), CliError> {
        let set = |name: &str| match name {
            "--mu1" => self.mu1.is_some(),
            "--mu2" => self.mu2.is_some(),
            "--method" => self.method.is_some(),
            "--snr-db" => self.snr_db.is_some(),
            "--seed" => self.seed.is_some(),
            _ => false,
        };
        for name in unused {
            if set(name) {
                return Err(CliError::Config(format!(
                    "{name} does not apply to `twr {command}`"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_tokens_round_trip() {
        for name in ["mne", "twr", "towr", "sowr", "mne+twr", "mne+sowr"] {
            assert_eq!(MethodKind::parse(name).unwrap().name(), name);
        }
        assert_eq!(MethodKind::parse("ridge").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn empty_solver_and_tuning_blocks_take_library_defaults() {
        let solver: SolverConfig = serde_json::from_str("{}").unwrap();
        let opts = solver.to_options();
        assert_eq!(opts.mu1, 0.0);
        assert_eq!(opts.max_iter, SolverOptions::default().max_iter);
        assert_eq!(solver.rank_tol(), DEFAULT_RANK_TOL);

        let tuning: TuningConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(tuning.cv_spec(), CvSpec::default());
        assert_eq!(tuning.gcv_spec(), GcvSpec::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<SolverConfig>("{\"mu3\": 1.0}");
        assert!(err.is_err());
    }

    #[test]
    fn waveform_requires_exactly_one_peak_spec() {
        let both: WaveformConfig = serde_json::from_str(
            "{\"freq_hz\": 10, \"decay_s\": 0.01, \"peak_time_s\": 0.1, \"energy_peak_s\": 0.1}",
        )
        .unwrap();
        assert!(both.resolve().is_err());
        let neither: WaveformConfig =
            serde_json::from_str("{\"freq_hz\": 10, \"decay_s\": 0.01}").unwrap();
        assert!(neither.resolve().is_err());
        let one: WaveformConfig =
            serde_json::from_str("{\"freq_hz\": 10, \"decay_s\": 0.01, \"energy_peak_s\": 0.1}")
                .unwrap();
        let spec = one.resolve().unwrap();
        assert!((spec.energy_peak_time() - 0.1).abs() <= 1e-15);
        assert_eq!(spec.amplitude, 1.0);
    }

    #[test]
    fn scenario_config_resolves_and_validates() {
        let text = r#"{
            "n_sensors": 3, "n_dipoles": 4, "n_timepoints": 32,
            "sample_rate_hz": 100.0,
            "sources": [{
                "dipoles": [1], "direction": [2, 0, 0],
                "waveform": {"freq_hz": 8, "decay_s": 0.02, "peak_time_s": 0.1}
            }],
            "snr_db": 5.0, "noise_seed": 7
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(text).unwrap();
        let spec = cfg.resolve().unwrap();
        assert_eq!(spec.n_components(), 12);
        assert_eq!(spec.active_sets[0].orientation, [1.0, 0.0, 0.0]);
        assert_eq!(spec.snr_db, 5.0);

        // null snr means noiseless
        let quiet: ScenarioConfig = serde_json::from_str(
            &text.replace("\"snr_db\": 5.0", "\"snr_db\": null"),
        )
        .unwrap();
        assert_eq!(quiet.resolve().unwrap().snr_db, f64::INFINITY);

        // out-of-range dipole index becomes a config error
        let bad: ScenarioConfig =
            serde_json::from_str(&text.replace("\"dipoles\": [1]", "\"dipoles\": [9]")).unwrap();
        assert_eq!(bad.resolve().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn overrides_reject_inapplicable_flags() {
        let ov = Overrides {
            snr_db: Some(3.0),
            ..Overrides::default()
        };
        assert!(ov.reject_unused("evaluate", &["--snr-db", "--mu1"]).is_err());
        assert!(ov.reject_unused("simulate", &["--mu1", "--mu2"]).is_ok());
    }
}
