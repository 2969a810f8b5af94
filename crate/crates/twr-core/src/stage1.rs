//! Stage 1: minimum-norm inversion of the forward operator.
//!
//! With `X = U diag(d) V^T` (thin SVD of the wide operator) the least-norm
//! solution of `Y = X B` is `B_hat = V diag(1/d) U^T Y`, computed here with
//! relative truncation of small singular values. A ridge variant
//! `X^T (X X^T + lambda I)^{-1} Y` provides the classical regularized
//! minimum-norm baseline.

use alloc::format;

use crate::error::{Error, Result};
use crate::model::{ensure_finite, Matrix, Vector};

/// Default relative truncation threshold: singular values at or below
/// `DEFAULT_RANK_TOL * d_max` are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Iteration cap for the SVD; hitting it means the input is pathological.
const SVD_MAX_SWEEPS: usize = 10_000;

/// Thin SVD `X = U diag(d) V^T` of an n x p operator with `n <= p`:
/// `U` is n x n orthogonal, `d` has the n singular values in descending
/// order, and `V` is p x n with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    pub u: Matrix,
    pub d: Vector,
    pub v: Matrix,
}

impl ThinSvd {
    /// Rebuilds `U diag(d) V^T`; intended for diagnostics and tests.
    pub fn reconstruct(&self) -> Matrix {
        &self.u * Matrix::from_diagonal(&self.d) * self.v.transpose()
    }
}

/// Computes the thin SVD of a wide (n <= p) finite operator.
pub fn thin_svd(x: &Matrix) -> Result<ThinSvd> {
    let (n, p) = x.shape();
    if n == 0 || p == 0 || n > p {
        return Err(Error::DimensionMismatch(format!(
            "thin_svd needs a nonempty wide operator (n <= p), got {n}x{p}"
        )));
    }
    ensure_finite(x)?;
    let svd = x
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure)?;
    let u = svd.u.ok_or(Error::ConvergenceFailure)?;
    let v = svd.v_t.ok_or(Error::ConvergenceFailure)?.transpose();
    Ok(ThinSvd {
        u,
        d: svd.singular_values,
        v,
    })
}

/// Raw minimum-norm estimate of the source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEstimate {
    /// The p x s estimate `B_hat`.
    pub b_hat: Matrix,
    /// Number of singular components that survived truncation.
    pub effective_rank: usize,
    /// The relative threshold that was applied.
    pub rank_tol: f64,
}

/// Minimum-norm inversion `B_hat = V diag(1/d) U^T Y` with relative
/// truncation: components with `d_i <= rank_tol * d_max` are dropped.
///
/// Among all `B` with `X B = X B_hat`, the returned estimate has the
/// smallest Frobenius norm; with full row rank it reproduces `Y` exactly.
pub fn raw_estimate(x: &Matrix, y: &Matrix, rank_tol: f64) -> Result<RawEstimate> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if !(rank_tol.is_finite() && rank_tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rank_tol must be finite and nonnegative, got {rank_tol}"
        )));
    }
    ensure_finite(y)?;
    let svd = thin_svd(x)?;
    let n = x.nrows();
    let d_max = svd.d[0];
    // The negated form routes a NaN leading singular value to the error.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(d_max > 0.0) {
        return Err(Error::DegenerateOperator);
    }
    let threshold = rank_tol * d_max;

    // C = diag(1/d) U^T Y on retained components, zero elsewhere.
    let mut c = svd.u.transpose() * y;
    let mut effective_rank = 0;
    for i in 0..n {
        if svd.d[i] > threshold {
            effective_rank += 1;
            let inv = 1.0 / svd.d[i];
            for j in 0..c.ncols() {
                c[(i, j)] *= inv;
            }
        } else {
            for j in 0..c.ncols() {
                c[(i, j)] = 0.0;
            }
        }
    }
    if effective_rank == 0 {
        return Err(Error::DegenerateOperator);
    }
    Ok(RawEstimate {
        b_hat: &svd.v * c,
        effective_rank,
        rank_tol,
    })
}

/// Ridge-regularized minimum-norm estimate
/// `B_hat = X^T (X X^T + lambda I)^{-1} Y` with `lambda > 0`;
/// `lambda = 0` falls back to [`raw_estimate`] with the default truncation.
pub fn raw_estimate_ridge(x: &Matrix, y: &Matrix, lambda: f64) -> Result<RawEstimate> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ridge lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return raw_estimate(x, y, DEFAULT_RANK_TOL);
    }
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "empty operator {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    ensure_finite(x)?;
    ensure_finite(y)?;
    let n = x.nrows();
    let gram = x * x.transpose() + Matrix::identity(n, n) * lambda;
    // lambda > 0 makes the Gram matrix positive definite.
    let chol = gram.cholesky().ok_or(Error::DegenerateOperator)?;
    let solved = chol.solve(y);
    Ok(RawEstimate {
        b_hat: x.transpose() * solved,
        effective_rank: n,
        rank_tol: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        let mut m = Matrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                m[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        m
    }

    /// Oracle: pseudo-inverse through the dual normal equations,
    /// `B = X^T (X X^T)^{-1} Y`, valid for full row rank. Deliberately a
    /// different route than the SVD used by the implementation.
    fn pinv_oracle(x: &Matrix, y: &Matrix) -> Matrix {
        let gram = x * x.transpose();
        x.transpose() * gram.lu().solve(y).unwrap()
    }

    #[test]
    fn identity_operator_returns_y() {
        let y = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = Matrix::identity(3, 3);
        let est = raw_estimate(&x, &y, DEFAULT_RANK_TOL).unwrap();
        assert!((est.b_hat.clone() - &y).norm() <= 1e-12);
        assert_eq!(est.effective_rank, 3);

        let est2 = raw_estimate(&(x * 2.0), &y, DEFAULT_RANK_TOL).unwrap();
        assert!((est2.b_hat * 2.0 - y).norm() <= 1e-12);
    }

    #[test]
    fn svd_shapes_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_matrix(&mut rng, 4, 7);
        let svd = thin_svd(&x).unwrap();
        assert_eq!(svd.u.shape(), (4, 4));
        assert_eq!(svd.d.len(), 4);
        assert_eq!(svd.v.shape(), (7, 4));
        for i in 1..4 {
            assert!(svd.d[i - 1] >= svd.d[i]);
            assert!(svd.d[i] >= 0.0);
        }
        let iu = (svd.u.transpose() * &svd.u - Matrix::identity(4, 4)).amax();
        let iv = (svd.v.transpose() * &svd.v - Matrix::identity(4, 4)).amax();
        assert!(iu <= 1e-10 && iv <= 1e-10);
        assert!((svd.reconstruct() - &x).norm() <= 1e-10 * x.norm());
        // Tall input is rejected.
        assert!(thin_svd(&x.transpose()).is_err());
    }

    #[test]
    fn matches_pseudo_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for trial in 0..25 {
            let n = 2 + (trial % 5);
            let p = n + 1 + (trial % 7);
            let x = random_matrix(&mut rng, n, p);
            let y = random_matrix(&mut rng, n, 3);
            let est = raw_estimate(&x, &y, DEFAULT_RANK_TOL).unwrap();
            let oracle = pinv_oracle(&x, &y);
            let rel = (est.b_hat.clone() - &oracle).norm() / oracle.norm().max(1e-30);
            assert!(rel <= 1e-8, "trial {trial}: relative error {rel}");
            assert_eq!(est.effective_rank, n);
            // Full row rank: the fit is exact.
            let fit = (&x * est.b_hat - &y).norm() / y.norm();
            assert!(fit <= 1e-8, "trial {trial}: fit residual {fit}");
        }
    }

    #[test]
    fn minimum_norm_among_exact_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..5 {
            let (n, p, s) = (3, 8, 4);
            let x = random_matrix(&mut rng, n, p);
            let y = random_matrix(&mut rng, n, s);
            let est = raw_estimate(&x, &y, DEFAULT_RANK_TOL).unwrap();
            let svd = thin_svd(&x).unwrap();
            for _ in 0..8 {
                // Perturb B_hat inside the null space of X: project a random
                // direction out of the V column space.
                let z = random_matrix(&mut rng, p, 1);
                let z_perp = &z - &svd.v * (svd.v.transpose() * &z);
                let w = random_matrix(&mut rng, s, 1);
                let perturbed = &est.b_hat + &z_perp * w.transpose();
                // Same fit, never smaller norm.
                assert!((&x * &perturbed - &y).norm() <= 1e-8 * y.norm().max(1.0));
                assert!(
                    perturbed.norm() >= est.b_hat.norm() - 1e-10,
                    "trial {trial}"
                );
            }
        }
    }

    #[test]
    fn truncation_drops_tiny_singular_values() {
        // X = diag(1, 1e-16) embedded in 2 x 5.
        let mut x = Matrix::zeros(2, 5);
        x[(0, 0)] = 1.0;
        x[(1, 1)] = 1e-16;
        let y = Matrix::from_row_slice(2, 1, &[3.0, 5.0]);
        let est = raw_estimate(&x, &y, 1e-12).unwrap();
        assert_eq!(est.effective_rank, 1);
        // Only the first component is inverted; nothing explodes.
        assert!((est.b_hat[(0, 0)] - 3.0).abs() <= 1e-10);
        assert!(est.b_hat.norm() <= 4.0);

        // rank_tol = 0 keeps every strictly positive singular value.
        let est_all = raw_estimate(&x, &y, 0.0).unwrap();
        assert_eq!(est_all.effective_rank, 2);
    }

    #[test]
    fn zero_operator_is_degenerate() {
        let x = Matrix::zeros(2, 4);
        let y = Matrix::zeros(2, 3);
        assert!(matches!(
            raw_estimate(&x, &y, DEFAULT_RANK_TOL),
            Err(Error::DegenerateOperator)
        ));
    }

    #[test]
    fn ridge_matches_direct_solve_and_plain_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for trial in 0..10 {
            let (n, p, s) = (3 + trial % 3, 9, 4);
            let x = random_matrix(&mut rng, n, p);
            let y = random_matrix(&mut rng, n, s);
            let lambda = 0.1 + 0.2 * trial as f64;
            let est = raw_estimate_ridge(&x, &y, lambda).unwrap();
            // Oracle: dense LU solve of the dual system.
            let gram = &x * x.transpose() + Matrix::identity(n, n) * lambda;
            let oracle = x.transpose() * gram.lu().solve(&y).unwrap();
            assert!((est.b_hat.clone() - &oracle).norm() <= 1e-9 * oracle.norm().max(1.0));

            // lambda = 0 reduces to the plain minimum-norm estimate.
            let plain = raw_estimate(&x, &y, DEFAULT_RANK_TOL).unwrap();
            let at_zero = raw_estimate_ridge(&x, &y, 0.0).unwrap();
            assert_eq!(at_zero.b_hat, plain.b_hat);

            // Small lambda approaches the plain estimate.
            let near = raw_estimate_ridge(&x, &y, 1e-12).unwrap();
            let rel = (near.b_hat - &plain.b_hat).norm() / plain.b_hat.norm();
            assert!(rel <= 1e-6, "trial {trial}: {rel}");
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut x = Matrix::zeros(2, 3);
        x[(0, 0)] = 1.0;
        x[(1, 1)] = f64::NAN;
        let y = Matrix::zeros(2, 2);
        assert!(matches!(
            raw_estimate(&x, &y, DEFAULT_RANK_TOL),
            Err(Error::NonFinite { .. })
        ));
    }
}
