//! Robust multichannel sparse recovery of complex-valued signals.
//!
//! The measurement model is `Y = A S + E` with a known dictionary `A` (n×p),
//! a K-rowsparse signal matrix `S` (p×q) and possibly heavy-tailed noise `E`.
//! Two greedy solvers are provided:
//!
//! - [`solver::sniht`]: simultaneous normalized iterative hard thresholding
//!   with the least-squares loss.
//! - [`solver::hub_sniht`]: the same projected-gradient scheme driven by the
//!   complex Huber loss, estimating the noise scale jointly with the signal.
//!
//! The [`doa`] module casts narrowband direction-of-arrival estimation on a
//! uniform linear array as such a problem and adds a MUSIC baseline; the
//! [`harness`] module runs seeded Monte Carlo comparisons of the three methods.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv;
pub mod doa;
pub mod error;
pub mod harness;
pub mod loss;
pub mod matrix;
pub mod solver;

pub use error::{Error, Result};
pub use loss::{ConsistencyFactors, LossFamily};
pub use matrix::{ComplexMatrix, SupportSet, WeightMatrix};
pub use num_complex::Complex64;
pub use solver::{hub_sniht, sniht, InitSupportMode, RecoveryResult, SolverConfig};
