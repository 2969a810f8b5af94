//! `twr evaluate`: score an estimate file against the truth file.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::config::{require_file, EvaluateConfig};
use crate::error::CliError;
use crate::model_io;
use crate::reports::{to_pretty, write_json, EnergyTable, EvaluationJson};
use twr_core::metrics;

pub fn cmd_evaluate(cfg: EvaluateConfig) -> Result<String, CliError> {
    require_file(&cfg.b_true)?;
    require_file(&cfg.b_est)?;
    let b_true = model_io::read_matrix(Path::new(&cfg.b_true))?;
    let b_est = model_io::read_matrix(Path::new(&cfg.b_est))?;
    let geometry = super::resolve_geometry(&cfg.geometry, b_true.nrows())?;
    if !(cfg.zero_tol.is_finite() && cfg.zero_tol >= 0.0) {
        return Err(CliError::Config(format!(
            "zero_tol must be finite and nonnegative, got {}",
            cfg.zero_tol
        )));
    }
    let out = super::ensure_out_dir(&cfg.out)?;

    let start = Instant::now();
    let mse = metrics::mse(&b_true, &b_est)?;
    let sparsity = metrics::sparsity_level(&b_est, cfg.zero_tol);
    let mut peak_distances = BTreeMap::new();
    let mut energy = BTreeMap::new();
    for &k in &cfg.eval_times {
        peak_distances.insert(k, metrics::peak_distance(&b_true, &b_est, &geometry, k)?);
        energy.insert(
            k,
            EnergyTable {
                truth: metrics::energy(&b_true, &geometry, k)?,
                est: metrics::energy(&b_est, &geometry, k)?,
            },
        );
    }

    let report = EvaluationJson {
        mse,
        peak_distances,
        sparsity,
        energy,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out, "evaluation.json", &report)?;
    to_pretty(&report)
}
