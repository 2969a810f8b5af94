//! Penalty-weight selection: K-fold cross-validation over sensor rows for
//! the sparsity weight `mu1`, and generalized cross-validation with a
//! bounded 1-D minimizer for the smoothness weight `mu2`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Matrix, ProblemInstance, Vector};
use crate::penalty::{self, PenaltyOperator};
use crate::solver::{self, SolverOptions};
use crate::stage1;

/// K-fold cross-validation plan for `mu1`.
///
/// Sensor rows are shuffled once by a ChaCha stream seeded with
/// `fold_seed` and split into `k` near-equal contiguous parts. Setting
/// `k = n_sensors` gives leave-one-out validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSpec {
    pub k: usize,
    /// Candidate `mu1` values, nonnegative and strictly increasing.
    pub mu1_grid: Vec<f64>,
    pub fold_seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            k: 5,
            mu1_grid: (0..10).map(|i| i as f64 / 9.0).collect(),
            fold_seed: 0,
        }
    }
}

impl CvSpec {
    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "cross-validation needs k >= 2, got {}",
                self.k
            )));
        }
        if self.mu1_grid.is_empty() {
            return Err(Error::InvalidParameter("mu1 grid must not be empty".to_string()));
        }
        for (i, &v) in self.mu1_grid.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "mu1 grid value {v} at position {i} is not a nonnegative finite number"
                )));
            }
            if i > 0 && v <= self.mu1_grid[i - 1] {
                return Err(Error::InvalidParameter(format!(
                    "mu1 grid must be strictly increasing (position {i})"
                )));
            }
        }
        Ok(())
    }
}

/// Search contract for the 1-D GCV minimization of `mu2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcvSpec {
    pub mu2_lo: f64,
    pub mu2_hi: f64,
    /// Relative width tolerance of the bracketing interval.
    pub tol: f64,
    /// Total budget of GCV evaluations, endpoints included.
    pub max_evals: usize,
    /// Use the entrywise trace variant
    /// `sum_l 1/(a_lj^2 + mu2 lambda_l)` (summed over the first
    /// `min(p, s)` entries, eigenvalues in descending order) instead of the
    /// trace of the hat matrix actually applied,
    /// `sum_l 1/(|a_j|^2 + mu2 lambda_l)`. The numerator is unaffected.
    pub entrywise_trace: bool,
}

impl Default for GcvSpec {
    fn default() -> Self {
        GcvSpec {
            mu2_lo: 1e-6,
            mu2_hi: 1e4,
            tol: 1e-3,
            max_evals: 100,
            entrywise_trace: false,
        }
    }
}

impl GcvSpec {
    fn validate(&self) -> Result<()> {
        if !(self.mu2_lo.is_finite() && self.mu2_hi.is_finite())
            || !(0.0 <= self.mu2_lo && self.mu2_lo < self.mu2_hi)
        {
            return Err(Error::InvalidParameter(format!(
                "gcv interval needs 0 <= mu2_lo < mu2_hi, got [{}, {}]",
                self.mu2_lo, self.mu2_hi
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gcv tol must be positive and finite, got {}",
                self.tol
            )));
        }
        if self.max_evals < 3 {
            return Err(Error::InvalidParameter(format!(
                "gcv max_evals must be at least 3, got {}",
                self.max_evals
            )));
        }
        Ok(())
    }
}

/// Result of the `mu1` cross-validation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    /// Grid value minimizing the mean held-out error (ties go to the
    /// smaller value).
    pub mu1_star: f64,
    /// Copy of the grid the scores refer to.
    pub mu1_grid: Vec<f64>,
    /// Mean held-out squared error per grid value.
    pub mean_scores: Vec<f64>,
    /// Held-out squared error per fold (outer index) and grid value.
    pub cell_scores: Vec<Vec<f64>>,
}

/// Result of the `mu2` GCV search.
#[derive(Debug, Clone, PartialEq)]
pub struct GcvOutcome {
    /// Location of the smallest sampled GCV value (ties go to the smaller
    /// `mu2`).
    pub mu2_star: f64,
    /// All sampled `(mu2, gcv)` pairs, sorted by `mu2`.
    pub samples: Vec<(f64, f64)>,
    /// Components dropped because their loading is zero or their hat-matrix
    /// trace is inadmissible at the lower interval end.
    pub skipped_components: usize,
    /// Both interval endpoints scored strictly below every interior sample,
    /// so the interval shows no interior minimum.
    pub non_unimodal: bool,
}

/// Options shared by the alternating tuner.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    /// Base solver settings; `mu1`/`mu2` seed the first fit and are then
    /// replaced by the tuned values.
    pub solver: SolverOptions,
    /// Singular-value truncation threshold for the first-stage estimate of
    /// the full data set.
    pub rank_tol: f64,
    /// Number of alternation passes (fit, refresh `mu2`, refresh `mu1`).
    pub outer_passes: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            solver: SolverOptions::default(),
            rank_tol: stage1::DEFAULT_RANK_TOL,
            outer_passes: 2,
        }
    }
}

/// Combined tuning report; `cv` and `gcv` describe the final pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub mu1_star: f64,
    pub mu2_star: f64,
    pub cv: CvOutcome,
    pub gcv: GcvOutcome,
    pub passes: usize,
    pub warnings: Vec<String>,
}

/// Splits row indices `0..n` into `k` near-equal folds using a seeded
/// shuffle. Every index lands in exactly one fold; folds are reported in
/// ascending index order.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "cross-validation needs k >= 2, got {k}"
        )));
    }
    if k > n {
        // The first fold that would come out empty is fold `n`.
        return Err(Error::FoldTooSmall(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut next = 0usize;
    for fi in 0..k {
        let take = base + usize::from(fi < extra);
        let mut fold: Vec<usize> = order[next..next + take].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        next += take;
    }
    Ok(folds)
}

/// Scores every `mu1` grid value by K-fold cross-validation over sensor
/// rows: for each fold the pipeline (first-stage estimate, then the full
/// two-way fit at the given `mu2`) runs on the retained rows and is scored
/// by the squared Frobenius error of predicting the held-out rows.
pub fn kfold_cv_mu1(
    instance: &ProblemInstance,
    spec: &CvSpec,
    mu2: f64,
    opts: &SolverOptions,
) -> Result<CvOutcome> {
    spec.validate()?;
    if !(mu2.is_finite() && mu2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu2 must be nonnegative and finite, got {mu2}"
        )));
    }
    let n = instance.n_sensors();
    let folds = kfold_partition(n, spec.k, spec.fold_seed)?;
    let penalty = PenaltyOperator::second_difference(instance.n_timepoints())?;
    let mut cell_scores = vec![vec![0.0f64; spec.mu1_grid.len()]; folds.len()];
    for (fi, fold) in folds.iter().enumerate() {
        let mut held = vec![false; n];
        for &row in fold {
            held[row] = true;
        }
        let retained: Vec<usize> = (0..n).filter(|&row| !held[row]).collect();
        let x_fit = instance.x.select_rows(retained.iter());
        let y_fit = instance.y.select_rows(retained.iter());
        let x_out = instance.x.select_rows(fold.iter());
        let y_out = instance.y.select_rows(fold.iter());
        let raw = stage1::raw_estimate(&x_fit, &y_fit, stage1::DEFAULT_RANK_TOL).map_err(|e| {
            Error::CvCell {
                fold: fi,
                grid_index: 0,
                source: Box::new(e),
            }
        })?;
        for (gi, &mu1) in spec.mu1_grid.iter().enumerate() {
            let cell_opts = SolverOptions {
                mu1,
                mu2,
                ..opts.clone()
            };
            let state =
                solver::twr_solve(&raw.b_hat, &penalty, &cell_opts).map_err(|e| Error::CvCell {
                    fold: fi,
                    grid_index: gi,
                    source: Box::new(e),
                })?;
            cell_scores[fi][gi] = (&y_out - &x_out * state.reconstruct()).norm_squared();
        }
    }
    let k = folds.len() as f64;
    let mean_scores: Vec<f64> = (0..spec.mu1_grid.len())
        .map(|gi| cell_scores.iter().map(|row| row[gi]).sum::<f64>() / k)
        .collect();
    let mut best = 0usize;
    for gi in 1..mean_scores.len() {
        if mean_scores[gi] < mean_scores[best] {
            best = gi;
        }
    }
    Ok(CvOutcome {
        mu1_star: spec.mu1_grid[best],
        mu1_grid: spec.mu1_grid.clone(),
        mean_scores,
        cell_scores,
    })
}

/// One valid GCV component: loading strength, response spectrum, and the
/// per-entry data for the entrywise trace variant.
struct GcvComponent {
    c: f64,
    w: Vector,
    a_sq: Vec<f64>,
}

impl GcvComponent {
    fn trace(&self, mu2: f64, lambda: &[f64], entrywise: bool) -> f64 {
        if entrywise {
            self.a_sq
                .iter()
                .zip(lambda)
                .map(|(&aa, &l)| 1.0 / (aa + mu2 * l))
                .sum()
        } else {
            penalty::hat_trace(self.c, mu2, lambda)
        }
    }

    fn numerator(&self, mu2: f64, lambda: &[f64]) -> f64 {
        let mut num = 0.0;
        for (l, &lam) in lambda.iter().enumerate() {
            let shrink = 1.0 - 1.0 / (self.c + mu2 * lam);
            num += self.w[l] * self.w[l] * shrink * shrink;
        }
        num
    }
}

/// Minimizes the average generalized cross-validation score of the `q`
/// temporal ridge regressions over `mu2 in [mu2_lo, mu2_hi]`.
///
/// Component `j` regresses the response `z_j = B_res_j^T a_j` (with
/// `B_res_j` the deflation residual entering column `j`) through the hat
/// matrix `S_j = P (|a_j|^2 I + mu2 Lambda)^-1 P^T`; its score is
/// `|z_j - S_j z_j|^2 / (1 - tr(S_j)/s)^2`. Components with zero loading,
/// or whose trace term is inadmissible at `mu2_lo` (where it is largest),
/// are skipped and counted. The returned minimizer is the best *sampled*
/// point: both endpoints plus every Brent iterate.
pub fn gcv_mu2(
    b_hat: &Matrix,
    a: &Matrix,
    b_res_inputs: &[Matrix],
    penalty: &PenaltyOperator,
    spec: &GcvSpec,
) -> Result<GcvOutcome> {
    spec.validate()?;
    let (p, s) = b_hat.shape();
    if a.nrows() != p || a.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "loading matrix is {}x{} but the estimate has {p} rows",
            a.nrows(),
            a.ncols()
        )));
    }
    if b_res_inputs.len() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} deflation residuals for {} columns",
            b_res_inputs.len(),
            a.ncols()
        )));
    }
    if penalty.len() != s {
        return Err(Error::DimensionMismatch(format!(
            "penalty is over {} timepoints but the estimate has {s}",
            penalty.len()
        )));
    }
    let lambda = penalty.eigenvalues().as_slice();
    let mut components = Vec::new();
    let mut skipped = 0usize;
    for (j, res) in b_res_inputs.iter().enumerate() {
        if res.shape() != (p, s) {
            return Err(Error::DimensionMismatch(format!(
                "deflation residual {j} is {}x{}, expected {p}x{s}",
                res.nrows(),
                res.ncols()
            )));
        }
        let aj = a.column(j);
        let c = aj.norm_squared();
        let z = res.tr_mul(&aj);
        let w = penalty.eigenvectors().tr_mul(&z);
        let a_sq: Vec<f64> = (0..p.min(s)).map(|l| aj[l] * aj[l]).collect();
        let comp = GcvComponent {
            c,
            w: Vector::from_column_slice(w.as_slice()),
            a_sq,
        };
        let tr_lo = comp.trace(spec.mu2_lo, lambda, spec.entrywise_trace);
        if c > 0.0 && tr_lo.is_finite() && tr_lo / (s as f64) < 1.0 {
            components.push(comp);
        } else {
            skipped += 1;
        }
    }
    if components.is_empty() {
        return Err(Error::NoValidComponent);
    }
    let n_valid = components.len() as f64;
    let score = |mu2: f64| -> f64 {
        let mut total = 0.0;
        for comp in &components {
            let den = 1.0 - comp.trace(mu2, lambda, spec.entrywise_trace) / s as f64;
            total += comp.numerator(mu2, lambda) / (den * den);
        }
        total / n_valid
    };
    let f_lo = score(spec.mu2_lo);
    let f_hi = score(spec.mu2_hi);
    let (_, brent_samples) = minimize_scalar(
        score,
        spec.mu2_lo,
        spec.mu2_hi,
        spec.tol,
        spec.max_evals.saturating_sub(2),
    );
    let interior_best = brent_samples
        .iter()
        .map(|&(_, f)| f)
        .fold(f64::INFINITY, f64::min);
    let non_unimodal = f_lo < interior_best && f_hi < interior_best;
    let mut samples = vec![(spec.mu2_lo, f_lo), (spec.mu2_hi, f_hi)];
    samples.extend(brent_samples);
    samples.sort_by(|a, b| a.partial_cmp(b).expect("gcv samples are finite"));
    let mut best = samples[0];
    for &(x, f) in &samples[1..] {
        if f < best.1 {
            best = (x, f);
        }
    }
    Ok(GcvOutcome {
        mu2_star: best.0,
        samples,
        skipped_components: skipped,
        non_unimodal,
    })
}

/// Bounded 1-D minimization by golden-section search with successive
/// parabolic interpolation (Brent's method). Stops once the bracket around
/// the best point shrinks below the relative tolerance, or after
/// `max_evals` function evaluations. Returns the final best point and every
/// `(x, f(x))` pair evaluated; the endpoints themselves are never sampled.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_evals: usize,
) -> (f64, Vec<(f64, f64)>) {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    const ZEPS: f64 = 1e-11;
    let mut samples = Vec::new();
    // The negated form rejects NaN bounds along with empty intervals.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(lo < hi) || max_evals == 0 {
        return (lo, samples);
    }
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    samples.push((x, fx));
    let (mut fw, mut fv) = (fx, fx);
    let mut evals = 1usize;
    let mut d = 0.0f64;
    let mut e = 0.0f64;
    while evals < max_evals {
        let m = 0.5 * (a + b);
        let tol1 = tol * libm::fabs(x) + ZEPS;
        let tol2 = 2.0 * tol1;
        if libm::fabs(x - m) <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if libm::fabs(e) > tol1 {
            // Parabola through (v, fv), (w, fw), (x, fx).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = libm::fabs(q);
            let e_prev = e;
            e = d;
            if libm::fabs(p) < libm::fabs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if libm::fabs(d) >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        samples.push((u, fu));
        evals += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, samples)
}

/// Alternating tuner: fit at the current weights, refresh `mu2` by GCV
/// conditioned on the fitted loadings, refresh `mu1` by K-fold CV at the
/// new `mu2`, and repeat for `outer_passes` rounds. The returned report
/// carries the final pass's scores and curve samples.
pub fn auto_tune(
    instance: &ProblemInstance,
    cv_spec: &CvSpec,
    gcv_spec: &GcvSpec,
    opts: &TuneOptions,
) -> Result<TuneOutcome> {
    cv_spec.validate()?;
    gcv_spec.validate()?;
    if opts.outer_passes == 0 {
        return Err(Error::InvalidParameter("auto tuning needs at least one outer pass".to_string()));
    }
    if !(opts.rank_tol.is_finite() && opts.rank_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rank_tol must be nonnegative and finite, got {}",
            opts.rank_tol
        )));
    }
    let penalty = PenaltyOperator::second_difference(instance.n_timepoints())?;
    let raw = stage1::raw_estimate(&instance.x, &instance.y, opts.rank_tol)?;
    let mut mu1 = opts.solver.mu1;
    let mut mu2 = opts.solver.mu2;
    let mut warnings = Vec::new();
    let mut last = None;
    for pass in 0..opts.outer_passes {
        let fit_opts = SolverOptions {
            mu1,
            mu2,
            ..opts.solver.clone()
        };
        let state = solver::twr_solve(&raw.b_hat, &penalty, &fit_opts)?;
        let residuals = solver::deflation_residuals(&raw.b_hat, &state.a, &state.g)?;
        let gcv = gcv_mu2(&raw.b_hat, &state.a, &residuals, &penalty, gcv_spec)?;
        mu2 = gcv.mu2_star;
        if gcv.skipped_components > 0 {
            warnings.push(format!(
                "pass {pass}: gcv skipped {} degenerate component(s)",
                gcv.skipped_components
            ));
        }
        if gcv.non_unimodal {
            warnings.push(format!(
                "pass {pass}: gcv curve has no interior minimum on the search interval; \
                 an endpoint was selected"
            ));
        }
        let cv = kfold_cv_mu1(instance, cv_spec, mu2, &opts.solver)?;
        mu1 = cv.mu1_star;
        last = Some((cv, gcv));
    }
    let (cv, gcv) = last.expect("at least one pass ran");
    Ok(TuneOutcome {
        mu1_star: mu1,
        mu2_star: mu2,
        cv,
        gcv,
        passes: opts.outer_passes,
        warnings,
    })
}
