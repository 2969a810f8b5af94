//! Crate-wide error type.

use alloc::boxed::Box;
use alloc::string::String;

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// Matrix or vector shapes are inconsistent with each other.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix entry is NaN or infinite where a finite value is required.
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    /// An iterative factorization (SVD, symmetric eigen) failed to converge.
    #[error("matrix factorization did not converge")]
    ConvergenceFailure,

    /// The forward operator has no singular value above the truncation
    /// threshold, so no component of the data can be inverted.
    #[error("degenerate operator: no singular value exceeds the truncation threshold")]
    DegenerateOperator,

    /// The temporal penalty needs at least three time points.
    #[error("penalty needs at least 3 time points, got {0}")]
    InvalidLength(usize),

    /// A column of `G` has zero norm, so the spatial update is undefined.
    #[error("column {0} of G has zero norm")]
    ZeroColumn(usize),

    /// The ridge system of a temporal update is singular: the column of `A`
    /// has zero loading and the penalty alone does not determine a solution.
    #[error("temporal update for column {0} is singular (zero loading, rank-deficient penalty)")]
    SingularUpdate(usize),

    /// A matrix that must have full column rank does not.
    #[error("rank-deficient matrix (no replacement basis left for column {0})")]
    RankDeficient(usize),

    /// The alternating objective left the finite range.
    #[error("objective diverged to a non-finite value at iteration {0}")]
    ObjectiveDiverged(usize),

    /// A cross-validation fold came out empty.
    #[error("cross-validation fold {0} is empty")]
    FoldTooSmall(usize),

    /// A solver failure inside one cross-validation cell, annotated with the
    /// fold and grid position where it happened.
    #[error("cv cell (fold {fold}, grid index {grid_index}): {source}")]
    CvCell {
        fold: usize,
        grid_index: usize,
        source: Box<Error>,
    },

    /// GCV found no component with positive loading and an admissible
    /// hat-matrix trace, so the `mu2` score is undefined everywhere.
    #[error("gcv: no component has positive loading and an admissible hat trace")]
    NoValidComponent,

    /// An index (dipole site, source row, or time sample) is out of range.
    #[error("index {index} out of range (valid bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    /// The noiseless data `X B` is identically zero, so no finite
    /// signal-to-noise ratio can be calibrated.
    #[error("X*B is identically zero; cannot calibrate a finite SNR")]
    SilentTruth,

    /// A time slice carries no energy, so its peak is undefined.
    #[error("no energy at time index {0}")]
    NoEnergy(usize),

    /// A scalar parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;
