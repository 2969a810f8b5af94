//! `twr compare`: Monte Carlo comparison of methods over noise replicates.
//!
//! Run `r` re-simulates the noise with seed `base_seed + r` and scores every
//! requested method on the same data. A failing cell is recorded and
//! excluded from the aggregates instead of aborting the table.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::config::{require_file, CompareConfig, MethodKind, SolverConfig};
use crate::error::CliError;
use crate::model_io;
use crate::reports::{
    to_pretty, write_json, CompareCell, CompareStats, ComparisonReport, MethodSummary,
};
use twr_core::penalty::PenaltyOperator;
use twr_core::simulate::{random_operator, synthesize};
use twr_core::solver::{deflation_residuals, towr_solve};
use twr_core::stage1;
use twr_core::tuning::{auto_tune, gcv_mu2, kfold_cv_mu1, TuneOptions};
use twr_core::{DipoleGeometry, Matrix, ProblemInstance};

pub fn cmd_compare(cfg: CompareConfig) -> Result<String, CliError> {
    if cfg.n_runs == 0 {
        return Err(CliError::Config("n_runs must be at least 1".to_string()));
    }
    if cfg.methods.is_empty() {
        return Err(CliError::Config("methods must not be empty".to_string()));
    }
    let methods: Vec<MethodKind> = cfg
        .methods
        .iter()
        .map(|m| MethodKind::parse(m))
        .collect::<Result<_, _>>()?;
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(CliError::Config(format!(
                "method {:?} is listed twice",
                m.name()
            )));
        }
    }
    if !(cfg.zero_tol.is_finite() && cfg.zero_tol >= 0.0) {
        return Err(CliError::Config(format!(
            "zero_tol must be finite and nonnegative, got {}",
            cfg.zero_tol
        )));
    }

    require_file(&cfg.b_true)?;
    let b_true = model_io::read_matrix(Path::new(&cfg.b_true))?;
    let x = match (&cfg.x, &cfg.operator) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either x or operator, not both".to_string(),
            ));
        }
        (Some(path), None) => {
            require_file(path)?;
            model_io::read_matrix(Path::new(path))?
        }
        (None, Some(op)) => {
            let n_sensors = cfg.n_sensors.ok_or_else(|| {
                CliError::Config("operator-generated X needs n_sensors".to_string())
            })?;
            random_operator(n_sensors, b_true.nrows(), op.cond, op.seed)?
        }
        (None, None) => {
            return Err(CliError::Config(
                "compare needs x (a matrix file) or operator (+ n_sensors)".to_string(),
            ));
        }
    };
    let geometry = super::resolve_geometry(&cfg.geometry, b_true.nrows())?;
    let snr_db = cfg.snr_db.unwrap_or(f64::INFINITY);
    let out = super::ensure_out_dir(&cfg.out)?;

    let start = Instant::now();
    let mut cells: Vec<Vec<CompareCell>> = vec![Vec::new(); methods.len()];
    for run in 0..cfg.n_runs {
        let seed = cfg.base_seed.wrapping_add(run as u64);
        let y = synthesize(&x, &b_true, snr_db, seed)?;
        for (mi, &method) in methods.iter().enumerate() {
            cells[mi].push(run_cell(&cfg, method, &x, &y, &b_true, &geometry, run, seed));
        }
    }

    let results: Vec<MethodSummary> = methods
        .iter()
        .zip(cells)
        .map(|(m, c)| summarize(m.name(), c, &cfg.eval_times))
        .collect();

    let report = ComparisonReport {
        methods: methods.iter().map(|m| m.name().to_string()).collect(),
        n_runs: cfg.n_runs,
        base_seed: cfg.base_seed,
        snr_db: cfg.snr_db,
        eval_times: cfg.eval_times.clone(),
        tuned: cfg.tune,
        results,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out, "comparison.json", &report)?;
    to_pretty(&report)
}

/// Per-run weight selection: each method is tuned by the criteria that
/// exist for it (CV for a spatial weight, GCV for a temporal one).
fn tuned_solver(
    cfg: &CompareConfig,
    method: MethodKind,
    x: &Matrix,
    y: &Matrix,
    geometry: &DipoleGeometry,
) -> Result<SolverConfig, CliError> {
    let mut solver = cfg.solver.clone();
    if !cfg.tune || method == MethodKind::Mne {
        return Ok(solver);
    }
    let cv_spec = cfg.tuning.cv_spec();
    let gcv_spec = cfg.tuning.gcv_spec();
    match method {
        MethodKind::Mne => unreachable!("handled above"),
        MethodKind::Twr | MethodKind::MneTwr => {
            let instance = ProblemInstance::new(
                x.clone(),
                y.clone(),
                geometry.clone(),
                cfg.sample_rate_hz,
            )?;
            let opts = TuneOptions {
                solver: cfg.solver.to_options(),
                rank_tol: cfg.solver.rank_tol(),
                outer_passes: cfg.tuning.passes(),
            };
            let outcome = auto_tune(&instance, &cv_spec, &gcv_spec, &opts)?;
            solver.mu1 = outcome.mu1_star;
            solver.mu2 = outcome.mu2_star;
        }
        MethodKind::Sowr | MethodKind::MneSowr => {
            let instance = ProblemInstance::new(
                x.clone(),
                y.clone(),
                geometry.clone(),
                cfg.sample_rate_hz,
            )?;
            let outcome = kfold_cv_mu1(&instance, &cv_spec, 0.0, &cfg.solver.to_options())?;
            solver.mu1 = outcome.mu1_star;
        }
        MethodKind::Towr => {
            if cfg.tuning.passes() == 0 {
                return Err(CliError::Config(
                    "tuning needs at least one pass".to_string(),
                ));
            }
            let raw = stage1::raw_estimate(x, y, cfg.solver.rank_tol())?;
            let penalty = PenaltyOperator::second_difference(raw.b_hat.ncols())?;
            let mut mu2 = cfg.solver.mu2;
            for _ in 0..cfg.tuning.passes() {
                let opts = twr_core::solver::SolverOptions {
                    mu2,
                    ..cfg.solver.to_options()
                };
                let state = towr_solve(&raw.b_hat, &penalty, &opts)?;
                let residuals = deflation_residuals(&raw.b_hat, &state.a, &state.g)?;
                let gcv = gcv_mu2(&raw.b_hat, &state.a, &residuals, &penalty, &gcv_spec)?;
                mu2 = gcv.mu2_star;
            }
            solver.mu2 = mu2;
        }
    }
    Ok(solver)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &CompareConfig,
    method: MethodKind,
    x: &Matrix,
    y: &Matrix,
    b_true: &Matrix,
    geometry: &DipoleGeometry,
    run: usize,
    seed: u64,
) -> CompareCell {
    let mut cell = CompareCell {
        run,
        seed,
        failed: false,
        error: None,
        mu1: None,
        mu2: None,
        mse: None,
        peak_distances: BTreeMap::new(),
        sparsity: None,
        wall_time_s: None,
        tune_wall_time_s: None,
    };
    let outcome = (|| -> Result<(), CliError> {
        let tune_start = Instant::now();
        let solver = tuned_solver(cfg, method, x, y, geometry)?;
        cell.tune_wall_time_s = cfg.tune.then(|| tune_start.elapsed().as_secs_f64());
        let (mu1, mu2) = super::reported_weights(method, &solver);
        cell.mu1 = mu1;
        cell.mu2 = mu2;

        let fit = super::run_method(x, y, method, &solver)?;
        cell.wall_time_s = Some(fit.wall_time_s);
        cell.mse = Some(twr_core::metrics::mse(b_true, &fit.b_est)?);
        cell.sparsity = Some(twr_core::metrics::sparsity_level(&fit.b_est, cfg.zero_tol));
        for &k in &cfg.eval_times {
            let d = twr_core::metrics::peak_distance(b_true, &fit.b_est, geometry, k)?;
            cell.peak_distances.insert(k, d);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        cell.failed = true;
        cell.error = Some(e.to_string());
        cell.mse = None;
        cell.sparsity = None;
        cell.peak_distances.clear();
    }
    cell
}

/// Mean and standard error of the mean (`0` with fewer than two values).
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(method: &str, cells: Vec<CompareCell>, eval_times: &[usize]) -> MethodSummary {
    let ok: Vec<&CompareCell> = cells.iter().filter(|c| !c.failed).collect();
    let n_failed = cells.len() - ok.len();
    let (mean, se) = if ok.is_empty() {
        (None, None)
    } else {
        let collect = |f: &dyn Fn(&CompareCell) -> f64| -> Vec<f64> {
            ok.iter().map(|c| f(c)).collect()
        };
        let (mse_m, mse_s) = mean_se(&collect(&|c| c.mse.unwrap()));
        let (sp_m, sp_s) = mean_se(&collect(&|c| c.sparsity.unwrap()));
        let (wt_m, wt_s) = mean_se(&collect(&|c| c.wall_time_s.unwrap()));
        let mut pd_m = BTreeMap::new();
        let mut pd_s = BTreeMap::new();
        for &k in eval_times {
            let (m, s) = mean_se(&collect(&|c| c.peak_distances[&k]));
            pd_m.insert(k, m);
            pd_s.insert(k, s);
        }
        (
            Some(CompareStats {
                mse: mse_m,
                peak_distances: pd_m,
                sparsity: sp_m,
                wall_time_s: wt_m,
            }),
            Some(CompareStats {
                mse: mse_s,
                peak_distances: pd_s,
                sparsity: sp_s,
                wall_time_s: wt_s,
            }),
        )
    };
    MethodSummary {
        method: method.to_string(),
        cells,
        mean,
        se,
        n_failed,
    }
}
