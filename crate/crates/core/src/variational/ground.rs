use crate::discretization::Field;
use crate::error::Result;
use crate::functionals::mass;
use crate::problem::Problem;
use crate::verification::residual_eq;

use super::descent::{line_search, normalize_raw, tangent_direction, LineSearch};
use super::dual::h_value_with;
use super::{DescentOptions, Level, SolveFlags, SolveReport};
use crate::eigensolver::EigenWorkspace;

/// `sech(sqrt(V∞) |x|)`, the shape of the ground state at infinity in 1D.
pub fn default_ground_seed(problem: &Problem) -> Field {
    let k = problem.v_inf().sqrt();
    Field::from_fn(problem.grid(), |n| 1.0 / (k * n.radius).cosh())
}

pub(super) fn is_autonomous(problem: &Problem) -> bool {
    let v_inf = problem.v_inf();
    problem.potential().values().iter().all(|&v| v == v_inf)
}

/// Minimizes `J` on `M` by `u ← normalize(|u - τ d|)`. The absolute value
/// never raises `J`, so the iterates stay nonnegative without losing descent.
/// A run that hits `max_iter` is returned with `converged = false`.
pub fn ground_state(
    problem: &Problem,
    seed: Option<&Field>,
    opts: &DescentOptions,
) -> Result<SolveReport> {
    let grid = problem.grid();
    let p = problem.p();
    let seed = match seed {
        Some(s) => {
            grid.check_field(s)?;
            s.abs()
        }
        None => default_ground_seed(problem),
    };
    let mut u = crate::functionals::normalize_to_manifold(grid, &seed, p)?.into_values();
    let op = problem.operator();
    let mut j = op.energy_form_unchecked(&u, &u);
    let mut j_history = Vec::new();
    let mut residual_history = Vec::new();
    let mut converged = false;
    let mut diagnosis = None;
    let mut iterations = 0;
    loop {
        let field = Field::from_values(grid, u.clone())?;
        let res = residual_eq(op, &field, j, p)?;
        j_history.push(j);
        residual_history.push(res);
        if res <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            diagnosis = Some(format!("no convergence in {} iterations", opts.max_iter));
            break;
        }
        let dir = tangent_direction(problem, &u, j);
        match line_search(problem, &u, j, j, &dir, opts, |y| {
            normalize_raw(problem, y.into_iter().map(f64::abs).collect())
        }) {
            LineSearch::Accepted { u: next, j: next_j } => {
                u = next;
                j = next_j;
            }
            LineSearch::Failed { .. } => {
                diagnosis = Some("line search stalled".into());
                break;
            }
        }
        iterations += 1;
    }
    let state = Field::from_values(grid, u)?;
    // recompute from scratch rather than trusting the accumulated increments
    let lambda = op.energy_form_unchecked(state.values(), state.values());
    let residual = residual_eq(op, &state, lambda, p)?;
    let (h, _) = h_value_with(problem, &state, &opts.eigen, &mut EigenWorkspace::new())?;
    let on_m = (mass(grid, &state, p)? - 1.0).abs() <= 1e-10;
    log::info!("ground state: λ = {lambda:.12}, residual {residual:.3e}, {iterations} iterations");
    Ok(SolveReport {
        level: if is_autonomous(problem) {
            Level::Lambda1Inf
        } else {
            Level::Lambda1
        },
        lambda,
        u: Some(state),
        residual,
        h_value: Some(h),
        iterations,
        j_history,
        residual_history,
        separation_history: Vec::new(),
        flags: SolveFlags {
            on_m,
            in_f: false,
            nodal: false,
            converged,
        },
        diagnosis,
        restarts: 0,
        pos_mass: None,
        neg_mass: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{Grid, GridMode};

    fn problem(well: f64, h: f64) -> Problem {
        let g = Grid::new(GridMode::Cartesian1d, 15.0, h).unwrap();
        let v = Field::from_fn(&g, |n| 1.0 - well * (-0.5 * n.radius).exp());
        Problem::new(&g, &v, 4.0, 1.0).unwrap()
    }

    #[test]
    fn soliton_level() {
        let pr = problem(0.0, 0.005);
        let rep = ground_state(&pr, None, &DescentOptions::default()).unwrap();
        assert_eq!(rep.level, Level::Lambda1Inf);
        assert!(rep.flags.converged && rep.flags.on_m);
        let exact = 4.0 / 3f64.sqrt();
        assert!((rep.lambda - exact).abs() <= 5e-3 * exact, "{}", rep.lambda);
        // the normalized soliton, a multiple of sech
        let u = rep.state();
        let s = Field::from_fn(pr.grid(), |n| 1.0 / n.radius.cosh());
        let s = crate::functionals::normalize_to_manifold(pr.grid(), &s, 4.0).unwrap();
        let err =
            crate::discretization::norm_l2(pr.grid(), &u.add_scaled(-1.0, &s).unwrap()).unwrap();
        assert!(err <= 1e-3, "{err}");
        assert!(u.values().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn well_lowers_the_level() {
        let opts = DescentOptions::default();
        let flat = ground_state(&problem(0.0, 0.01), None, &opts).unwrap();
        let well = ground_state(&problem(0.3, 0.01), None, &opts).unwrap();
        assert_eq!(well.level, Level::Lambda1);
        assert!(well.flags.converged);
        assert!(
            well.lambda < flat.lambda - 1e-3,
            "{} vs {}",
            well.lambda,
            flat.lambda
        );
    }

    #[test]
    fn seed_sign_is_irrelevant() {
        let pr = problem(0.3, 0.02);
        let seed = Field::from_fn(pr.grid(), |n| (-(n.coords[0] - 1.0).powi(2)).exp());
        let opts = DescentOptions::default();
        let a = ground_state(&pr, Some(&seed), &opts).unwrap();
        let b = ground_state(&pr, Some(&-seed.abs()), &opts).unwrap();
        assert_eq!(a.state().values(), b.state().values());
        assert_eq!(a.lambda, b.lambda);
    }

    #[test]
    fn energy_history_descends() {
        let pr = problem(0.3, 0.02);
        let seed = Field::from_fn(pr.grid(), |n| (-(n.coords[0] - 2.0).powi(2) / 9.0).exp());
        let rep = ground_state(&pr, Some(&seed), &DescentOptions::default()).unwrap();
        for w in rep.j_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-13 * w[0], "{} -> {}", w[0], w[1]);
        }
    }
}
