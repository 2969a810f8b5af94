//! `twr reconstruct`: invert one data set with one method.

use std::path::Path;

use crate::config::{require_file, MethodKind, ReconstructConfig};
use crate::error::CliError;
use crate::model_io;
use crate::reports::{to_pretty, write_json, Diagnostics, ReconstructFiles};

pub fn cmd_reconstruct(cfg: ReconstructConfig) -> Result<String, CliError> {
    let method = MethodKind::parse(&cfg.method)?;
    require_file(&cfg.x)?;
    require_file(&cfg.y)?;
    let x = model_io::read_matrix(Path::new(&cfg.x))?;
    let y = model_io::read_matrix(Path::new(&cfg.y))?;
    let out = super::ensure_out_dir(&cfg.out)?;

    let run = super::run_method(&x, &y, method, &cfg.solver)?;
    model_io::write_matrix(&out.join("B_est.mat"), &run.b_est)?;

    let (mu1, mu2) = super::reported_weights(method, &cfg.solver);
    let diagnostics = Diagnostics {
        method: method.name().to_string(),
        mu1,
        mu2,
        q: cfg.solver.q,
        stage1: run.stage1,
        iterations_run: run.state.as_ref().map_or(0, |s| s.iterations_run),
        converged: run.state.as_ref().is_none_or(|s| s.converged),
        objective_trace: run
            .state
            .as_ref()
            .map_or_else(Vec::new, |s| s.objective_trace.clone()),
        sparsity_trace: run
            .state
            .as_ref()
            .map_or_else(Vec::new, |s| s.sparsity_trace.clone()),
        ortho_error_trace: run
            .state
            .as_ref()
            .map_or_else(Vec::new, |s| s.ortho_error_trace.clone()),
        wall_time_s: run.wall_time_s,
        files: ReconstructFiles {
            b_est: "B_est.mat".to_string(),
        },
    };
    write_json(&out, "diagnostics.json", &diagnostics)?;
    to_pretty(&diagnostics)
}
