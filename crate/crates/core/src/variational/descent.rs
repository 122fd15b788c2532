//! One projected descent step on `M`, shared by the ground-state and nodal
//! solvers. Vectors here are raw nodal values on the problem grid.

use crate::functionals::{abs_pow, mass_raw};
use crate::problem::Problem;

use super::DescentOptions;

/// Tangent direction `d = P(g_J - c g_I)` with `P = λ A^{-1}` and `c` chosen
/// so that `⟨g_I, d⟩ = 0`, together with the directional decrease rate
/// `⟨g_J, d⟩` of `J` along `-d`.
pub(super) struct Direction {
    pub d: Vec<f64>,
    pub slope: f64,
}

pub(super) fn tangent_direction(problem: &Problem, u: &[f64], lambda: f64) -> Direction {
    let op = problem.operator();
    let cell = problem.grid().weights();
    let p = problem.p();
    let gi: Vec<f64> = u.iter().map(|&x| p * abs_pow(x, p - 2.0) * x).collect();
    // P g_I = λ A^{-1} g_I, and P g_J = 2λ u without a solve.
    let mut pgi: Vec<f64> = gi.iter().zip(cell).map(|(g, c)| g * c).collect();
    op.solve_stiffness_in_place(&mut pgi);
    pgi.iter_mut().for_each(|x| *x *= lambda);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..u.len() {
        num += cell[i] * gi[i] * 2.0 * lambda * u[i];
        den += cell[i] * gi[i] * pgi[i];
    }
    let c = num / den;
    let d: Vec<f64> = u
        .iter()
        .zip(&pgi)
        .map(|(x, y)| 2.0 * lambda * x - c * y)
        .collect();
    // ⟨g_J, d⟩ = 2 uᵀ S d
    let slope = 2.0 * op.energy_form_unchecked(u, &d);
    Direction { d, slope }
}

/// `J(a) - J(b) = (a - b)ᵀ S (a + b)`, free of the cancellation in the plain difference.
pub(super) fn energy_change(problem: &Problem, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    problem.operator().energy_form_unchecked(&diff, &sum)
}

pub(super) fn normalize_raw(problem: &Problem, mut u: Vec<f64>) -> Option<Vec<f64>> {
    let i = mass_raw(problem.grid().weights(), &u, problem.p());
    if !(i > 0.0) || !i.is_finite() {
        return None;
    }
    let s = i.powf(-1.0 / problem.p());
    u.iter_mut().for_each(|x| *x *= s);
    Some(u)
}

pub(super) enum LineSearch {
    Accepted {
        u: Vec<f64>,
        j: f64,
    },
    /// No step length passed; `rejected` counts trials refused by the retraction.
    Failed {
        rejected: usize,
    },
}

/// Armijo backtracking from `τ0 = 1/(2λ)`. `retract` maps `u - τ d` back onto
/// the constraint set or refuses it. The acceptance test allows a slack of a
/// few ulps of `J`, the accuracy to which the normalization fixes `I = 1`.
pub(super) fn line_search(
    problem: &Problem,
    u: &[f64],
    j: f64,
    lambda: f64,
    dir: &Direction,
    opts: &DescentOptions,
    mut retract: impl FnMut(Vec<f64>) -> Option<Vec<f64>>,
) -> LineSearch {
    let slack = 16.0 * f64::EPSILON * j.abs().max(1.0);
    let mut tau = 1.0 / (2.0 * lambda);
    let mut rejected = 0;
    for _ in 0..=opts.max_backtracks {
        let y: Vec<f64> = u.iter().zip(&dir.d).map(|(x, d)| x - tau * d).collect();
        match retract(y) {
            Some(trial) => {
                let dj = energy_change(problem, &trial, u);
                if dj <= -opts.armijo_slope * tau * dir.slope + slack {
                    return LineSearch::Accepted {
                        j: j + dj,
                        u: trial,
                    };
                }
            }
            None => rejected += 1,
        }
        tau *= opts.backtrack_factor;
    }
    LineSearch::Failed { rejected }
}
