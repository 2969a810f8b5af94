//! Two-way regularized decomposition for ill-posed spatio-temporal linear
//! inverse problems.
//!
//! Given sensor data `Y` (n x s) generated by a wide forward operator `X`
//! (n x p, n <= p) acting on an unknown source matrix `B` (p x s),
//!
//! ```text
//! Y = X B + E,
//! ```
//!
//! the reconstruction runs in two stages:
//!
//! 1. [`stage1::raw_estimate`] inverts `X` in the minimum-norm sense through
//!    a truncated thin SVD, producing a raw (noisy, non-sparse) estimate
//!    `B_hat`.
//! 2. [`solver::twr_solve`] denoises `B_hat` by an alternating low-rank
//!    decomposition `B_hat ~ A G^T` in which the spatial factor `A` is made
//!    sparse by an entrywise L1 penalty (weight `mu1`) and the temporal
//!    factor `G` is made smooth by a quadratic second-difference penalty
//!    (weight `mu2`):
//!
//!    ```text
//!    min_{A, G}  |B_hat - A G^T|_F^2  +  mu1 |A|_1  +  mu2 tr(G^T Omega G).
//!    ```
//!
//! One-way fits ([`solver::towr_solve`], [`solver::sowr_solve`]) keep only
//! the temporal or only the spatial penalty and serve as baselines, as does
//! the plain (optionally ridge-regularized) minimum-norm estimate.
//!
//! Penalty weights are tuned from the data: K-fold cross-validation over a
//! `mu1` grid ([`tuning::kfold_cv_mu1`]) and generalized cross-validation
//! minimized by Brent's method for `mu2` ([`tuning::gcv_mu2`]), alternated
//! by [`tuning::auto_tune`].
//!
//! [`simulate`] builds synthetic scenarios (seeded random operators, damped
//! sinusoid sources, exact-SNR noise) and [`metrics`] scores reconstructions
//! (MSE, per-dipole energy, peak localization distance, sparsity level).
//!
//! Everything here is deterministic: equal inputs produce bit-identical
//! outputs. All randomness (noise, fold shuffles) flows through explicit
//! seeds. The crate is `no_std`-compatible (`alloc` required); disable the
//! default `std` feature for embedded use.
//!
//! ```
//! use twr_core::{penalty::PenaltyOperator, solver, stage1};
//!
//! // A tiny 4-sensor / 6-source / 5-sample problem.
//! let x = twr_core::simulate::random_operator(4, 6, 10.0, 7).unwrap();
//! let b = nalgebra::DMatrix::<f64>::from_fn(6, 5, |i, k| {
//!     if i < 2 { (1.0 + i as f64) * (k as f64 * 0.4).sin() } else { 0.0 }
//! });
//! let y = &x * &b;
//!
//! let raw = stage1::raw_estimate(&x, &y, stage1::DEFAULT_RANK_TOL).unwrap();
//! let omega = PenaltyOperator::second_difference(5).unwrap();
//! let opts = solver::SolverOptions { mu1: 0.05, mu2: 0.1, ..Default::default() };
//! let fit = solver::twr_solve(&raw.b_hat, &omega, &opts).unwrap();
//! assert!(fit.converged);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod metrics;
pub mod model;
pub mod penalty;
pub mod simulate;
pub mod solver;
pub mod stage1;
pub mod tuning;

pub use error::{Error, Result};
pub use model::{DipoleGeometry, Matrix, ProblemInstance, Vector};
