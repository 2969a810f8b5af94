//! `twr simulate`: build the operator, the truth, and noisy data files.

use std::path::Path;

use crate::config::{require_file, OperatorConfig, SimulateConfig};
use crate::error::CliError;
use crate::model_io;
use crate::reports::{
    to_pretty, write_json, OperatorEcho, ScenarioEcho, SimulateFiles, SourceEcho, WaveformEcho,
};
use twr_core::simulate::{build_truth, random_operator, synthesize, ScenarioSpec};
use twr_core::{DipoleGeometry, Matrix};

/// Measured SNR of the written data; `None` when there is no noise.
fn achieved_snr_db(clean: &Matrix, y: &Matrix) -> Option<f64> {
    let noise_norm = (y - clean).norm();
    if noise_norm > 0.0 {
        Some(20.0 * (clean.norm() / noise_norm).log10())
    } else {
        None
    }
}

fn source_echoes(spec: &ScenarioSpec) -> Vec<SourceEcho> {
    spec.active_sets
        .iter()
        .map(|set| {
            let energy_peak_s = set.waveform.energy_peak_time();
            SourceEcho {
                dipoles: set.dipoles.clone(),
                orientation: set.orientation,
                waveform: WaveformEcho {
                    freq_hz: set.waveform.freq_hz,
                    peak_time_s: set.waveform.peak_time_s,
                    energy_peak_s,
                    energy_peak_sample: spec.nearest_sample(energy_peak_s),
                    decay_s: set.waveform.decay_s,
                    amplitude: set.waveform.amplitude,
                },
            }
        })
        .collect()
}

pub fn cmd_simulate(cfg: SimulateConfig) -> Result<String, CliError> {
    let spec = cfg.scenario.resolve()?;
    let out = super::ensure_out_dir(&cfg.out)?;

    let (x, operator, generated) = match (&cfg.x_path, &cfg.operator) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either x_path or operator, not both".to_string(),
            ));
        }
        (Some(path), None) => {
            require_file(path)?;
            let x = model_io::read_matrix(Path::new(path))?;
            let echo = OperatorEcho {
                kind: "file".to_string(),
                cond: None,
                seed: None,
                path: Some(path.clone()),
            };
            (x, echo, false)
        }
        (None, maybe_op) => {
            let op = maybe_op.clone().unwrap_or(OperatorConfig {
                cond: 50.0,
                seed: 0,
            });
            let x = random_operator(spec.n_sensors, spec.n_components(), op.cond, op.seed)?;
            let echo = OperatorEcho {
                kind: "generated".to_string(),
                cond: Some(op.cond),
                seed: Some(op.seed),
                path: None,
            };
            (x, echo, true)
        }
    };

    let b_true = build_truth(&spec, &x)?;
    let y = synthesize(&x, &b_true, spec.snr_db, spec.noise_seed)?;
    let clean = &x * &b_true;

    if generated {
        model_io::write_matrix(&out.join("X.mat"), &x)?;
    }
    model_io::write_matrix(&out.join("B_true.mat"), &b_true)?;
    model_io::write_matrix(&out.join("Y.mat"), &y)?;
    let lattice = DipoleGeometry::unit_lattice(spec.n_dipoles)?;
    let coords: Vec<[f64; 3]> = (0..spec.n_dipoles)
        .map(|d| lattice.coord(d))
        .collect::<Result<_, _>>()?;
    model_io::write_geometry(&out.join("geometry.csv"), &coords)?;

    let echo = ScenarioEcho {
        n_sensors: spec.n_sensors,
        n_dipoles: spec.n_dipoles,
        n_timepoints: spec.n_timepoints,
        sample_rate_hz: spec.sample_rate_hz,
        sources: source_echoes(&spec),
        snr_db: spec.snr_db.is_finite().then_some(spec.snr_db),
        noise_seed: spec.noise_seed,
        operator,
        achieved_snr_db: achieved_snr_db(&clean, &y),
        files: SimulateFiles {
            x: generated.then(|| "X.mat".to_string()),
            b_true: "B_true.mat".to_string(),
            y: "Y.mat".to_string(),
            geometry: "geometry.csv".to_string(),
        },
    };
    write_json(&out, "scenario.json", &echo)?;
    to_pretty(&echo)
}
