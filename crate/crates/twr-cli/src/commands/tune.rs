//! `twr tune`: pick the penalty weights from the data.

use std::path::Path;

use crate::config::{require_file, TuneConfig};
use crate::error::CliError;
use crate::model_io;
use crate::reports::{to_pretty, write_json, TuningReport};
use twr_core::tuning::{auto_tune, TuneOptions};
use twr_core::ProblemInstance;

pub fn cmd_tune(cfg: TuneConfig) -> Result<String, CliError> {
    require_file(&cfg.x)?;
    require_file(&cfg.y)?;
    let x = model_io::read_matrix(Path::new(&cfg.x))?;
    let y = model_io::read_matrix(Path::new(&cfg.y))?;
    let geometry = super::resolve_geometry(&cfg.geometry, x.ncols())?;
    let instance = ProblemInstance::new(x, y, geometry, cfg.sample_rate_hz)?;
    let out = super::ensure_out_dir(&cfg.out)?;

    let opts = TuneOptions {
        solver: cfg.solver.to_options(),
        rank_tol: cfg.solver.rank_tol(),
        outer_passes: cfg.tuning.passes(),
    };
    let outcome = auto_tune(&instance, &cfg.tuning.cv_spec(), &cfg.tuning.gcv_spec(), &opts)?;

    let report = TuningReport {
        mu1_grid: outcome.cv.mu1_grid,
        cv_scores: outcome.cv.cell_scores,
        mu1_star: outcome.mu1_star,
        gcv_samples: outcome.gcv.samples,
        mu2_star: outcome.mu2_star,
        warnings: outcome.warnings,
    };
    write_json(&out, "tuning.json", &report)?;
    to_pretty(&report)
}
