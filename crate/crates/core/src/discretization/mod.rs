//! Truncated grids, grid functions, the discrete operator `-Δ + V`,
//! quadrature and linear solves.

mod banded;
pub mod csv;
mod field;
mod grid;
mod operator;

pub use banded::BandCholesky;
pub use field::Field;
pub use grid::{sphere_surface, Grid, GridId, GridMode, Node, MIN_CELLS_PER_HALF_WIDTH};
pub use operator::{
    apply_operator, inner, integrate, norm_l2, solve_operator, solve_operator_capped,
    SchrodingerOperator, DEFAULT_SOLVE_MAX_ITER, DEFAULT_SOLVE_TOL,
};
