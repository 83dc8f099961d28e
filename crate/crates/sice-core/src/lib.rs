//! Estimation of sparse inverse covariance (precision) matrices from
//! descriptor sets.
//!
//! The crate provides:
//!
//! * [`mat`] — a dense row-major matrix type with the symmetric-matrix
//!   primitives everything else builds on;
//! * [`eigen`] / [`chol`] — Jacobi eigendecomposition and Cholesky
//!   factorization used by the exact reference paths;
//! * [`autodiff`] — a minimal reverse-mode tape over matrix primitives,
//!   with finite-difference gradient checking;
//! * [`pooling`] — covariance pooling of descriptor matrices, trace
//!   normalization, partial correlations, triangular vectorization;
//! * [`newton_schulz`] — coupled Newton-Schulz iteration for the
//!   approximate matrix inverse and square root;
//! * [`isice`] — the iterative sparse inverse covariance solver
//!   (box-constrained projected gradient ascent with Newton-Schulz
//!   inner inverses), in both eager and tape-recorded form;
//! * [`glasso`] — an exact ADMM graphical-lasso solver used as the
//!   reference optimum;
//! * [`synth`] — synthetic ground-truth generation and error metrics
//!   for structure-recovery experiments;
//! * [`modulator`] — the scalar gate that adapts learning rate and
//!   sparsity strength on the fly.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature instead of `std` for freestanding builds. All arithmetic is
//! in `f64` and every routine is deterministic given its inputs.

#![cfg_attr(not(feature = "std"), no_std)]
// Validation guards use the `!(x > 0.0)` form on purpose: unlike
// `x <= 0.0`, a negated comparison also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("sice-core requires either the `std` or the `libm` feature");

pub(crate) mod fm;

pub mod autodiff;
pub mod chol;
pub mod eigen;
mod error;
pub mod glasso;
pub mod isice;
pub mod mat;
pub mod modulator;
pub mod newton_schulz;
pub mod pooling;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use mat::Mat;
