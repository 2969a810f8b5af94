//! Temporal roughness penalty: squared second differences along time.

use alloc::format;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::model::{Matrix, Vector};

/// Eigenvalues of `Omega` below this are snapped to exactly zero, so the
/// penalty's two-dimensional null space (constants and linear ramps) is
/// represented exactly instead of as numerical dust.
pub const EIGENVALUE_CLAMP: f64 = 1e-12;

/// Iteration cap for the symmetric eigensolver; generous enough that hitting
/// it means the input is pathological rather than merely large.
const EIGEN_MAX_SWEEPS: usize = 10_000;

/// The s x s penalty matrix `Omega = D^T D` built from the (s-2) x s second
/// difference stencil, together with its eigendecomposition `Omega = P
/// diag(lambda) P^T`.
///
/// The eigendecomposition is computed once at construction and reused by
/// every temporal update and every GCV evaluation, which all reduce to
/// diagonal operations in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyOperator {
    omega: Matrix,
    /// Orthogonal eigenvector matrix `P`, columns ordered like `lambda`.
    eigvecs: Matrix,
    /// Eigenvalues in descending order, clamped to be exactly nonnegative.
    lambda: Vector,
}

impl PenaltyOperator {
    /// Builds the second-difference penalty for `s >= 3` time points.
    pub fn second_difference(s: usize) -> Result<Self> {
        if s < 3 {
            return Err(Error::InvalidLength(s));
        }
        let mut d = Matrix::zeros(s - 2, s);
        for r in 0..s - 2 {
            d[(r, r)] = 1.0;
            d[(r, r + 1)] = -2.0;
            d[(r, r + 2)] = 1.0;
        }
        let omega = d.transpose() * &d;

        let eigen = SymmetricEigen::try_new(omega.clone(), f64::EPSILON, EIGEN_MAX_SWEEPS)
            .ok_or(Error::ConvergenceFailure)?;

        // nalgebra returns eigenpairs unordered; sort descending with the
        // original position as a deterministic tie-break.
        let s_eigs: alloc::vec::Vec<usize> = {
            let mut idx: alloc::vec::Vec<usize> = (0..s).collect();
            idx.sort_by(|&a, &b| {
                eigen.eigenvalues[b]
                    .partial_cmp(&eigen.eigenvalues[a])
                    .unwrap_or(core::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx
        };
        let mut eigvecs = Matrix::zeros(s, s);
        let mut lambda = Vector::zeros(s);
        for (dst, &src) in s_eigs.iter().enumerate() {
            let v = eigen.eigenvalues[src];
            lambda[dst] = if v < EIGENVALUE_CLAMP { 0.0 } else { v };
            eigvecs.set_column(dst, &eigen.eigenvectors.column(src));
        }

        Ok(PenaltyOperator {
            omega,
            eigvecs,
            lambda,
        })
    }

    /// Number of time points `s`.
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The penalty matrix `Omega`.
    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    /// Orthogonal eigenvector matrix `P`.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigvecs
    }

    /// Eigenvalues in descending order (all `>= 0`, small ones clamped to 0).
    pub fn eigenvalues(&self) -> &Vector {
        &self.lambda
    }

    /// Quadratic roughness `tr(G^T Omega G)` of the columns of `G`.
    pub fn quad_form(&self, g: &Matrix) -> Result<f64> {
        if g.nrows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "G has {} rows but the penalty covers {} time points",
                g.nrows(),
                self.len()
            )));
        }
        let og = &self.omega * g;
        Ok(g.iter().zip(og.iter()).map(|(a, b)| a * b).sum())
    }

    /// Solves `(c I + mu2 Omega) g = v` through the eigenbasis:
    /// `g = P diag(1 / (c + mu2 lambda)) P^T v`.
    ///
    /// The caller must ensure `c + mu2 * lambda_l > 0` for every `l`
    /// (equivalently `c > 0`, since the smallest eigenvalue is zero).
    pub fn ridge_solve(&self, c: f64, mu2: f64, v: &Vector) -> Vector {
        let mut w = self.eigvecs.transpose() * v;
        for l in 0..w.len() {
            w[l] /= c + mu2 * self.lambda[l];
        }
        &self.eigvecs * w
    }
}

/// Trace of the ridge hat matrix `S = P diag(1/(c + mu2 lambda)) P^T` in
/// closed form: `sum_l 1 / (c + mu2 lambda_l)`.
pub fn hat_trace(c: f64, mu2: f64, lambda: &[f64]) -> f64 {
    lambda.iter().map(|&l| 1.0 / (c + mu2 * l)).sum()
}
