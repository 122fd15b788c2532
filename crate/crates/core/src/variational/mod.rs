//! Ground states, the dual set `F = {u ∈ M : h(u) = 0}`, and the nodal
//! solution at the second minimax level `λ2 = inf_F J`.
//!
//! Both minimizations are projected descents on `M` in the metric
//! `⟨f, g⟩ = J(f, g) / λ`, i.e. the gradient is preconditioned by `λ A^{-1}`.
//! With this metric the initial step `τ0 = 1/(2λ)` lands on
//! `normalize(A^{-1}(|u|^{p-2} u))`, and Armijo backtracking only ever shortens it.

mod bounds;
mod descent;
mod dual;
mod ground;
mod nodal;

use serde::{Deserialize, Serialize};

use crate::discretization::Field;
use crate::eigensolver::EigenOptions;

pub use bounds::{lambda2_bounds, loop_minimax_upper, LoopBound};
pub use dual::{h_eval, h_value_with, project_to_f, project_to_f_with, Projection};
pub use ground::{default_ground_seed, ground_state};
pub use nodal::{nodal_minimax, two_bump_seed, NodalSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Lambda1,
    Lambda1Inf,
    Lambda2,
    Lambda2Radial,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveFlags {
    pub on_m: bool,
    pub in_f: bool,
    pub nodal: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub level: Level,
    pub lambda: f64,
    #[serde(skip)]
    pub u: Option<Field>,
    /// `residual_eq(u, λ)` with `λ = J(u)`.
    pub residual: f64,
    /// `h(u)`; `None` when not evaluated.
    pub h_value: Option<f64>,
    pub iterations: usize,
    pub j_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    /// Distance between the centroids of `(u⁺)^p` and `(u⁻)^p` (nodal runs).
    pub separation_history: Vec<f64>,
    pub flags: SolveFlags,
    pub diagnosis: Option<String>,
    pub restarts: usize,
    pub pos_mass: Option<f64>,
    pub neg_mass: Option<f64>,
}

impl SolveReport {
    /// The computed state. Always present on reports returned by the solvers.
    pub fn state(&self) -> &Field {
        self.u.as_ref().expect("solver reports carry their state")
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,J,residual,separation\n");
        for (k, j) in self.j_history.iter().enumerate() {
            let r = self.residual_history.get(k).copied().unwrap_or(f64::NAN);
            let s = self.separation_history.get(k).copied().unwrap_or(f64::NAN);
            out.push_str(&format!("{k},{j},{r},{s}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    /// Residual of the Euler–Lagrange equation regarded as converged.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    /// Target `|h|` of the projection onto `F`.
    pub tol_h: f64,
    pub max_projection_steps: usize,
    /// Nodality threshold relative to the mass.
    pub nodal_delta: f64,
    pub max_restarts: usize,
    /// Nodal descent: try a slow-mode extrapolation every this many
    /// iterations; zero disables it.
    pub extrapolate_every: usize,
    /// Iterations over which a residual plateau is judged.
    pub plateau_window: usize,
    pub eigen: EigenOptions,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-9,
            max_iter: 20_000,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 40,
            tol_h: 1e-10,
            max_projection_steps: 60,
            nodal_delta: crate::verification::DEFAULT_NODAL_DELTA,
            max_restarts: 3,
            extrapolate_every: 20,
            plateau_window: 2_000,
            eigen: EigenOptions::default(),
        }
    }
}
