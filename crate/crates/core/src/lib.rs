//! Matrix-free sparse recovery.
//!
//! The crate solves three closely related problems for an underdetermined
//! linear operator `A`:
//!
//! - `LS(tau)`: minimize `||Ax - b||_2` subject to `||x||_1 <= tau`
//!   ([`nesta_lasso::solve_lasso`], accelerated proximal gradient with
//!   duality-gap triggered prox-center restarts);
//! - `BP(sigma)`: minimize `||x||_1` subject to `||Ax - b||_2 <= sigma`
//!   ([`parnes::solve_bpdn`], inexact Newton root finding on the Pareto curve
//!   `phi(tau) = sigma`, with `LS(tau)` as the inner solver);
//! - `QP(lambda)`: minimize `0.5 ||Ax - b||_2^2 + lambda ||x||_1`
//!   ([`baselines::fista_qp`], used to compute reference solutions).
//!
//! Every solve counts its applications of `A` and `A^T` in a
//! [`MatvecLedger`]; `N_A = n_forward + n_adjoint` is the cost metric reported
//! everywhere.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod l1proj;
pub mod nesta_lasso;
pub mod operators;
pub mod parnes;
pub mod problems;
pub mod report;
pub mod vecops;

pub use error::{Error, Result};
pub use operators::{LinearOperator, MatvecLedger, OperatorKind};
pub use report::{SolveReport, Termination};
