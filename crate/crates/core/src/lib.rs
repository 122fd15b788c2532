//! Numerical solver for the eigenvalue problem of the scalar field equation
//!
//! ```text
//! -Δu + V(x) u = λ |u|^{p-2} u,    V = V∞ - W,
//! ```
//!
//! on truncated domains: ground states on the constraint manifold
//! `M = {I(u) = 1}`, the weighted linearized eigenpairs `A v = μ |u|^{p-2} v`,
//! and sign-changing solutions at the second minimax level computed as the
//! minimum of `J` over the set `F = {u ∈ M : h(u) = 0}`, together with the
//! checks that certify them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretization;
pub mod eigensolver;
pub mod error;
pub mod functionals;
pub mod model;
pub mod problem;
pub mod variational;
pub mod verification;

pub use discretization::{Field, Grid, GridMode};
pub use error::{Error, Result};
pub use problem::Problem;
