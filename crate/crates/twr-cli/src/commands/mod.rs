//! The five subcommands. Each takes its resolved config and returns the
//! pretty-printed report JSON it also wrote to disk.

mod compare;
mod evaluate;
mod reconstruct;
mod simulate;
mod tune;

pub use compare::cmd_compare;
pub use evaluate::cmd_evaluate;
pub use reconstruct::cmd_reconstruct;
pub use simulate::cmd_simulate;
pub use tune::cmd_tune;

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{MethodKind, SolverConfig};
use crate::error::CliError;
use crate::model_io;
use crate::reports::Stage1Echo;
use twr_core::penalty::PenaltyOperator;
use twr_core::solver::{self, DecompositionState};
use twr_core::stage1::{self, RawEstimate};
use twr_core::{DipoleGeometry, Matrix};

/// Creates the output directory (and parents) if needed.
pub(crate) fn ensure_out_dir(out: &str) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(out);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Loads a geometry file, or derives the unit lattice from the component
/// count when no file is given.
pub(crate) fn resolve_geometry(
    geometry: &Option<String>,
    n_components: usize,
) -> Result<DipoleGeometry, CliError> {
    match geometry {
        Some(path) => {
            crate::config::require_file(path)?;
            let coords = model_io::read_geometry(Path::new(path))?;
            let geom = DipoleGeometry::new(coords)?;
            if geom.n_components() != n_components {
                return Err(CliError::Config(format!(
                    "geometry {path} has {} dipoles ({} components) but the problem has {} components",
                    geom.n_dipoles(),
                    geom.n_components(),
                    n_components
                )));
            }
            Ok(geom)
        }
        None => {
            if !n_components.is_multiple_of(3) || n_components == 0 {
                return Err(CliError::Config(format!(
                    "cannot derive a dipole lattice from {n_components} components; \
                     give a geometry file"
                )));
            }
            Ok(DipoleGeometry::unit_lattice(n_components / 3)?)
        }
    }
}

/// One full reconstruction: stage 1 (exact or ridge per the method), then
/// the method's stage-2 fit if it has one.
pub(crate) struct MethodRun {
    pub b_est: Matrix,
    pub stage1: Stage1Echo,
    pub state: Option<DecompositionState>,
    pub wall_time_s: f64,
}

pub(crate) fn run_method(
    x: &Matrix,
    y: &Matrix,
    method: MethodKind,
    solver_cfg: &SolverConfig,
) -> Result<MethodRun, CliError> {
    let start = Instant::now();
    let raw = fit_stage1(x, y, method, solver_cfg)?;
    let state = fit_stage2(&raw.b_hat, method, solver_cfg)?;
    let b_est = match &state {
        Some(s) => s.reconstruct(),
        None => raw.b_hat.clone(),
    };
    let ridge = method_uses_ridge(method, solver_cfg);
    Ok(MethodRun {
        b_est,
        stage1: Stage1Echo {
            kind: if ridge { "ridge" } else { "exact" }.to_string(),
            ridge_lambda: if ridge { solver_cfg.ridge_lambda } else { 0.0 },
            effective_rank: raw.effective_rank,
            rank_tol: raw.rank_tol,
        },
        state,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn method_uses_ridge(method: MethodKind, solver_cfg: &SolverConfig) -> bool {
    (method.ridge_stage1() || method == MethodKind::Mne) && solver_cfg.ridge_lambda > 0.0
}

fn fit_stage1(
    x: &Matrix,
    y: &Matrix,
    method: MethodKind,
    solver_cfg: &SolverConfig,
) -> Result<RawEstimate, CliError> {
    if method_uses_ridge(method, solver_cfg) {
        Ok(stage1::raw_estimate_ridge(x, y, solver_cfg.ridge_lambda)?)
    } else {
        Ok(stage1::raw_estimate(x, y, solver_cfg.rank_tol())?)
    }
}

fn fit_stage2(
    b_hat: &Matrix,
    method: MethodKind,
    solver_cfg: &SolverConfig,
) -> Result<Option<DecompositionState>, CliError> {
    let opts = solver_cfg.to_options();
    let state = match method {
        MethodKind::Mne => None,
        MethodKind::Twr | MethodKind::MneTwr => {
            let penalty = PenaltyOperator::second_difference(b_hat.ncols())?;
            Some(solver::twr_solve(b_hat, &penalty, &opts)?)
        }
        MethodKind::Towr => {
            let penalty = PenaltyOperator::second_difference(b_hat.ncols())?;
            Some(solver::towr_solve(b_hat, &penalty, &opts)?)
        }
        MethodKind::Sowr | MethodKind::MneSowr => Some(solver::sowr_solve(b_hat, &opts)?),
    };
    Ok(state)
}

/// The penalty weights a method actually applies, for reporting. `None`
/// means the method has no such penalty.
pub(crate) fn reported_weights(
    method: MethodKind,
    solver_cfg: &SolverConfig,
) -> (Option<f64>, Option<f64>) {
    match method {
        MethodKind::Mne => (None, None),
        MethodKind::Twr | MethodKind::MneTwr => (Some(solver_cfg.mu1), Some(solver_cfg.mu2)),
        MethodKind::Towr => (None, Some(solver_cfg.mu2)),
        MethodKind::Sowr | MethodKind::MneSowr => (Some(solver_cfg.mu1), None),
    }
}
