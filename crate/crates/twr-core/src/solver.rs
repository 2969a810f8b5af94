//! Stage 2: alternating sparse/smooth decomposition `B_hat ~ A G^T`.
//!
//! The criterion
//!
//! ```text
//! min_{A, G}  |B_hat - A G^T|_F^2 + mu1 |A|_1 + mu2 tr(G^T Omega G)
//! ```
//!
//! is minimized blockwise. Columns are extracted sequentially against the
//! deflated residual `B_res,j = B_hat - sum_{l<j} a_l g_l^T`:
//!
//! * spatial update — with `g_j` fixed the problem decouples per entry and
//!   is solved exactly by soft thresholding the regression coefficients
//!   `r_ij = (B_res g_j)_i / |g_j|^2` at level `mu1 / (2 |g_j|^2)`;
//! * temporal update — with `a_j` fixed each column solves the ridge system
//!   `(|a_j|^2 I + mu2 Omega) g_j = B_res^T a_j`, evaluated in the penalty
//!   eigenbasis;
//! * `G` is then re-orthonormalized by a thin QR with deterministic repair
//!   of zero or dependent columns, so every iteration hands the next one an
//!   exact orthonormal basis.
//!
//! Iteration stops when the reconstruction `B_tilde = A G^T` moves by less
//! than `rel_tol` in relative Frobenius norm, or after `max_iter` rounds.
//! Everything is deterministic; equal inputs give bit-identical outputs.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{ensure_finite, Matrix, Vector};
use crate::penalty::PenaltyOperator;

/// Default iteration cap for the alternating loop.
pub const DEFAULT_MAX_ITER: usize = 15;
/// Default relative-change convergence tolerance.
pub const DEFAULT_REL_TOL: f64 = 1e-6;
/// Columns whose QR diagonal falls at or below this relative threshold are
/// treated as rank-deficient and repaired.
const QR_RANK_TOL: f64 = 1e-12;
/// Iteration cap for the initialization SVD.
const SVD_MAX_SWEEPS: usize = 10_000;

/// Knobs of the alternating solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Sparsity weight on `A` (entrywise L1).
    pub mu1: f64,
    /// Smoothness weight on `G` (quadratic second-difference form).
    pub mu2: f64,
    /// Decomposition rank; `None` means full rank `q = s`.
    pub q: Option<usize>,
    /// Maximum number of alternating iterations.
    pub max_iter: usize,
    /// Relative Frobenius change of `B_tilde` that counts as converged.
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mu1: 0.0,
            mu2: 0.0,
            q: None,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

impl SolverOptions {
    fn validated_q(&self, s: usize) -> Result<usize> {
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be finite and positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".to_string()));
        }
        let q = self.q.unwrap_or(s);
        if q == 0 || q > s {
            return Err(Error::InvalidParameter(format!(
                "rank q must satisfy 1 <= q <= s = {s}, got {q}"
            )));
        }
        Ok(q)
    }
}

/// Result of an alternating fit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionState {
    /// Sparse spatial factor, p x q.
    pub a: Matrix,
    /// Orthonormal temporal factor, s x q.
    pub g: Matrix,
    /// Iterations actually run (1-based count).
    pub iterations_run: usize,
    /// Whether the relative-change test passed within `max_iter`.
    pub converged: bool,
    /// Objective value after each iteration.
    pub objective_trace: Vec<f64>,
    /// Fraction of exactly-zero entries of `B_tilde` after each iteration.
    pub sparsity_trace: Vec<f64>,
    /// `max |G^T G - I|` after each iteration's re-orthonormalization.
    pub ortho_error_trace: Vec<f64>,
}

impl DecompositionState {
    /// The denoised estimate `B_tilde = A G^T`.
    pub fn reconstruct(&self) -> Matrix {
        &self.a * self.g.transpose()
    }
}

/// Scalar soft threshold `sign(r) * max(|r| - lam, 0)`; the exact minimizer
/// of `(a - r)^2 + 2 lam |a|`.
pub fn soft_threshold(r: f64, lam: f64) -> f64 {
    if r > lam {
        r - lam
    } else if r < -lam {
        r + lam
    } else {
        0.0
    }
}

fn check_spatial_shapes(b_hat: &Matrix, g: &Matrix) -> Result<()> {
    if g.nrows() != b_hat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "G has {} rows but B_hat has {} columns",
            g.nrows(),
            b_hat.ncols()
        )));
    }
    if g.ncols() == 0 || g.ncols() > g.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "G must be s x q with 1 <= q <= s, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    Ok(())
}

fn check_weight(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

fn spatial_columns(b_hat: &Matrix, g: &Matrix, mu1: f64, strict: bool) -> Result<Matrix> {
    let p = b_hat.nrows();
    let q = g.ncols();
    let mut b_res = b_hat.clone();
    let mut a = Matrix::zeros(p, q);
    let mut r = Vector::zeros(p);
    for j in 0..q {
        if j > 0 {
            b_res.ger(-1.0, &a.column(j - 1), &g.column(j - 1), 1.0);
        }
        let gj = g.column(j);
        let g2 = gj.norm_squared();
        if g2 == 0.0 {
            if strict {
                return Err(Error::ZeroColumn(j));
            }
            continue; // a_j stays zero
        }
        r.gemv(1.0 / g2, &b_res, &gj, 0.0);
        let lam = mu1 / (2.0 * g2);
        for i in 0..p {
            a[(i, j)] = soft_threshold(r[i], lam);
        }
    }
    Ok(a)
}

/// Spatial update: soft-thresholded sequential regression of the deflated
/// residual onto each column of `G`.
///
/// With `mu1 = 0` and orthonormal `G` this reduces to `A = B_hat G`.
/// Errors with [`Error::ZeroColumn`] if some `|g_j| = 0`.
pub fn update_a(b_hat: &Matrix, g: &Matrix, mu1: f64) -> Result<Matrix> {
    check_spatial_shapes(b_hat, g)?;
    check_weight("mu1", mu1)?;
    ensure_finite(b_hat)?;
    ensure_finite(g)?;
    spatial_columns(b_hat, g, mu1, true)
}

fn temporal_columns(
    b_hat: &Matrix,
    a: &Matrix,
    penalty: &PenaltyOperator,
    mu2: f64,
    strict: bool,
) -> Result<Matrix> {
    let s = b_hat.ncols();
    let q = a.ncols();
    let lambda_min = penalty.eigenvalues()[s - 1];
    let mut b_res = b_hat.clone();
    let mut g = Matrix::zeros(s, q);
    for j in 0..q {
        if j > 0 {
            b_res.ger(-1.0, &a.column(j - 1), &g.column(j - 1), 1.0);
        }
        let aj = a.column(j);
        let c = aj.norm_squared();
        if c == 0.0 {
            if strict && mu2 * lambda_min == 0.0 {
                return Err(Error::SingularUpdate(j));
            }
            // Either the caller substitutes a basis column later (lenient
            // path), or the ridge system is invertible with a zero right
            // side; the solution is the zero column in both cases.
            continue;
        }
        let v = b_res.tr_mul(&aj);
        g.set_column(j, &penalty.ridge_solve(c, mu2, &v));
    }
    Ok(g)
}

/// Temporal update: each column solves its deflated ridge system
/// `(|a_j|^2 I + mu2 Omega) g_j = B_res^T a_j` in the penalty eigenbasis.
///
/// Errors with [`Error::SingularUpdate`] when `|a_j| = 0` and the penalty
/// contributes no curvature either (`mu2 * lambda_min = 0`).
pub fn update_g(b_hat: &Matrix, a: &Matrix, penalty: &PenaltyOperator, mu2: f64) -> Result<Matrix> {
    if a.nrows() != b_hat.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but B_hat has {}",
            a.nrows(),
            b_hat.nrows()
        )));
    }
    if penalty.len() != b_hat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "penalty covers {} time points but B_hat has {} columns",
            penalty.len(),
            b_hat.ncols()
        )));
    }
    if a.ncols() == 0 || a.ncols() > b_hat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "A must be p x q with 1 <= q <= s, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_weight("mu2", mu2)?;
    ensure_finite(b_hat)?;
    ensure_finite(a)?;
    temporal_columns(b_hat, a, penalty, mu2, true)
}

/// Flips every column of an orthonormal matrix so its largest-magnitude
/// entry (first such entry on ties) is positive. Pins the sign left free by
/// QR, making orthonormalization fully deterministic.
fn fix_column_signs(m: &mut Matrix) {
    for j in 0..m.ncols() {
        let mut lead = 0usize;
        let mut best = -1.0;
        for i in 0..m.nrows() {
            let v = libm::fabs(m[(i, j)]);
            if v > best {
                best = v;
                lead = i;
            }
        }
        if m[(lead, j)] < 0.0 {
            m.column_mut(j).neg_mut();
        }
    }
}

fn bad_qr_columns(r: &Matrix, q: usize) -> Vec<usize> {
    let mut dmax = 0.0f64;
    for j in 0..q {
        dmax = dmax.max(libm::fabs(r[(j, j)]));
    }
    (0..q)
        .filter(|&j| libm::fabs(r[(j, j)]) <= QR_RANK_TOL * dmax)
        .collect()
}

/// Thin QR orthonormalization preserving the column span and a
/// deterministic sign convention.
///
/// Errors with [`Error::RankDeficient`] when the input does not have full
/// numerical column rank (relative QR-diagonal threshold `1e-12`).
pub fn orthonormalize(g: &Matrix) -> Result<Matrix> {
    let (s, q) = g.shape();
    if q == 0 || q > s {
        return Err(Error::DimensionMismatch(format!(
            "cannot orthonormalize a {s}x{q} matrix (need 1 <= q <= s)"
        )));
    }
    ensure_finite(g)?;
    let qr = g.clone().qr();
    let bad = bad_qr_columns(&qr.r(), q);
    if let Some(&j) = bad.first() {
        return Err(Error::RankDeficient(j));
    }
    let mut qm = qr.q();
    fix_column_signs(&mut qm);
    Ok(qm)
}

/// Like [`orthonormalize`], but zero/dependent columns are replaced by the
/// next candidate from `pool` (unused right singular vectors of the
/// initialization, then the identity basis) and the QR is re-run until the
/// basis is full rank. Candidates are consumed in order, so the repair is
/// deterministic.
fn orthonormalize_with_repair(g_raw: Matrix, pool: &[Vector]) -> Result<Matrix> {
    let q = g_raw.ncols();
    let mut g = g_raw;
    let mut cursor = 0usize;
    loop {
        let qr = g.clone().qr();
        let bad = bad_qr_columns(&qr.r(), q);
        if bad.is_empty() {
            let mut qm = qr.q();
            fix_column_signs(&mut qm);
            return Ok(qm);
        }
        for &j in &bad {
            match pool.get(cursor) {
                Some(v) => {
                    g.set_column(j, v);
                    cursor += 1;
                }
                None => return Err(Error::RankDeficient(j)),
            }
        }
    }
}

/// Penalized objective `|B_hat - A G^T|_F^2 + mu1 |A|_1 + mu2 tr(G^T Omega G)`.
pub fn objective(
    b_hat: &Matrix,
    a: &Matrix,
    g: &Matrix,
    penalty: &PenaltyOperator,
    mu1: f64,
    mu2: f64,
) -> Result<f64> {
    if a.nrows() != b_hat.nrows() || g.nrows() != b_hat.ncols() || a.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "objective shapes disagree: B_hat {}x{}, A {}x{}, G {}x{}",
            b_hat.nrows(),
            b_hat.ncols(),
            a.nrows(),
            a.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    check_weight("mu1", mu1)?;
    check_weight("mu2", mu2)?;
    let fit = (b_hat - a * g.transpose()).norm_squared();
    let l1: f64 = a.iter().map(|v| libm::fabs(*v)).sum();
    Ok(fit + mu1 * l1 + mu2 * penalty.quad_form(g)?)
}

/// Per-component deflation residuals `B_res,j = B_hat - sum_{l<j} a_l g_l^T`
/// for `j = 0..q`; entry `j` is the matrix each column-`j` update regressed
/// against.
pub fn deflation_residuals(b_hat: &Matrix, a: &Matrix, g: &Matrix) -> Result<Vec<Matrix>> {
    if a.nrows() != b_hat.nrows() || g.nrows() != b_hat.ncols() || a.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "deflation shapes disagree: B_hat {}x{}, A {}x{}, G {}x{}",
            b_hat.nrows(),
            b_hat.ncols(),
            a.nrows(),
            a.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let q = a.ncols();
    let mut out = Vec::with_capacity(q);
    let mut b_res = b_hat.clone();
    for j in 0..q {
        if j > 0 {
            b_res.ger(-1.0, &a.column(j - 1), &g.column(j - 1), 1.0);
        }
        out.push(b_res.clone());
    }
    Ok(out)
}

/// The per-component regression responses `z_j = B_res,j^T a_j` used by the
/// temporal updates and by GCV, computed without materializing the
/// residual matrices.
pub fn deflation_responses(b_hat: &Matrix, a: &Matrix, g: &Matrix) -> Result<Vec<Vector>> {
    if a.nrows() != b_hat.nrows() || g.nrows() != b_hat.ncols() || a.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "deflation shapes disagree: B_hat {}x{}, A {}x{}, G {}x{}",
            b_hat.nrows(),
            b_hat.ncols(),
            a.nrows(),
            a.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let q = a.ncols();
    let mut out = Vec::with_capacity(q);
    let mut b_res = b_hat.clone();
    for j in 0..q {
        if j > 0 {
            b_res.ger(-1.0, &a.column(j - 1), &g.column(j - 1), 1.0);
        }
        out.push(b_res.tr_mul(&a.column(j)));
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum SpatialStep {
    /// Deflated soft-threshold regression (weight `mu1`).
    SoftThreshold,
    /// Closed form `A = B_hat G` (no sparsity penalty).
    ClosedForm,
}

#[derive(Clone, Copy)]
enum TemporalStep {
    /// Deflated ridge systems (weight `mu2`).
    Ridge,
    /// Closed form `G_raw = B_hat^T A` (no smoothness penalty).
    ClosedForm,
}

/// Initial basis: right singular vectors of `B_hat`, completed/replaced
/// deterministically when `B_hat` is zero or rank-deficient. Also returns
/// the repair pool: leftover singular vectors, then the identity basis.
fn init_basis(b_hat: &Matrix, q: usize) -> Result<(Matrix, Vec<Vector>)> {
    let s = b_hat.ncols();
    let mut pool: Vec<Vector> = Vec::new();
    let mut g0 = Matrix::zeros(s, q);
    let mut needs_completion = false;
    if b_hat.iter().all(|&v| v == 0.0) {
        for j in 0..q {
            g0[(j, j)] = 1.0;
        }
    } else {
        let svd = b_hat
            .clone()
            .try_svd(false, true, f64::EPSILON, SVD_MAX_SWEEPS)
            .ok_or(Error::ConvergenceFailure)?;
        let r = svd.v_t.ok_or(Error::ConvergenceFailure)?.transpose();
        let take = q.min(r.ncols());
        for j in 0..take {
            g0.set_column(j, &r.column(j));
        }
        for j in take..r.ncols() {
            pool.push(r.column(j).into_owned());
        }
        needs_completion = take < q;
    }
    for e in 0..s {
        let mut v = Vector::zeros(s);
        v[e] = 1.0;
        pool.push(v);
    }
    if needs_completion {
        g0 = orthonormalize_with_repair(g0, &pool)?;
    }
    Ok((g0, pool))
}

fn solve_loop(
    b_hat: &Matrix,
    penalty: Option<&PenaltyOperator>,
    opts: &SolverOptions,
    spatial: SpatialStep,
    temporal: TemporalStep,
) -> Result<DecompositionState> {
    let (p, s) = b_hat.shape();
    if p == 0 || s == 0 {
        return Err(Error::DimensionMismatch(format!(
            "B_hat must be nonempty, got {p}x{s}"
        )));
    }
    if let Some(pen) = penalty {
        if pen.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "penalty covers {} time points but B_hat has {s} columns",
                pen.len()
            )));
        }
    }
    let q = opts.validated_q(s)?;
    ensure_finite(b_hat)?;

    let (mut g, pool) = init_basis(b_hat, q)?;
    let mut a = Matrix::zeros(p, q);
    let mut b_prev = Matrix::zeros(p, s);
    let mut objective_trace = Vec::new();
    let mut sparsity_trace = Vec::new();
    let mut ortho_error_trace = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;

    for _ in 0..opts.max_iter {
        iterations_run += 1;
        a = match spatial {
            SpatialStep::SoftThreshold => spatial_columns(b_hat, &g, opts.mu1, false)?,
            SpatialStep::ClosedForm => b_hat * &g,
        };
        let g_raw = match temporal {
            TemporalStep::Ridge => {
                let pen = penalty.expect("ridge temporal step requires a penalty");
                temporal_columns(b_hat, &a, pen, opts.mu2, false)?
            }
            TemporalStep::ClosedForm => b_hat.tr_mul(&a),
        };
        g = orthonormalize_with_repair(g_raw, &pool)?;

        let b_tilde = &a * g.transpose();
        ensure_finite(&b_tilde)?;
        let fit = (b_hat - &b_tilde).norm_squared();
        let l1: f64 = a.iter().map(|v| libm::fabs(*v)).sum();
        let rough = match penalty {
            Some(pen) if opts.mu2 > 0.0 => pen.quad_form(&g)?,
            _ => 0.0,
        };
        let obj = fit + opts.mu1 * l1 + opts.mu2 * rough;
        if !obj.is_finite() {
            return Err(Error::ObjectiveDiverged(iterations_run));
        }
        objective_trace.push(obj);
        sparsity_trace.push(metrics::sparsity_level(&b_tilde, 0.0));
        ortho_error_trace.push((g.tr_mul(&g) - Matrix::identity(q, q)).amax());

        let num = (&b_tilde - &b_prev).norm();
        let den = b_tilde.norm();
        let hit = if den > 0.0 {
            num <= opts.rel_tol * den
        } else {
            num == 0.0
        };
        b_prev = b_tilde;
        if hit {
            converged = true;
            break;
        }
    }

    Ok(DecompositionState {
        a,
        g,
        iterations_run,
        converged,
        objective_trace,
        sparsity_trace,
        ortho_error_trace,
    })
}

/// Full two-way fit: sparse spatial factor and smooth temporal factor.
pub fn twr_solve(
    b_hat: &Matrix,
    penalty: &PenaltyOperator,
    opts: &SolverOptions,
) -> Result<DecompositionState> {
    solve_loop(
        b_hat,
        Some(penalty),
        opts,
        SpatialStep::SoftThreshold,
        TemporalStep::Ridge,
    )
}

/// Temporal-only one-way fit: `mu1` is forced to zero and the spatial
/// update takes its closed form `A = B_hat G`.
pub fn towr_solve(
    b_hat: &Matrix,
    penalty: &PenaltyOperator,
    opts: &SolverOptions,
) -> Result<DecompositionState> {
    let opts = SolverOptions {
        mu1: 0.0,
        ..opts.clone()
    };
    solve_loop(
        b_hat,
        Some(penalty),
        &opts,
        SpatialStep::ClosedForm,
        TemporalStep::Ridge,
    )
}

/// Spatial-only one-way fit: `mu2` is forced to zero and the temporal
/// update takes its closed form `G_raw = B_hat^T A` before
/// re-orthonormalization. Needs no penalty operator.
pub fn sowr_solve(b_hat: &Matrix, opts: &SolverOptions) -> Result<DecompositionState> {
    let opts = SolverOptions {
        mu2: 0.0,
        ..opts.clone()
    };
    solve_loop(
        b_hat,
        None,
        &opts,
        SpatialStep::SoftThreshold,
        TemporalStep::ClosedForm,
    )
}
