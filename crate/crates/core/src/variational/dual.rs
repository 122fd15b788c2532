//! The odd functional `h(u) = ∫ |u|^{p-2} u v1(u)` and the projection onto its
//! zero set along the family `t u⁺ - (1 - t) u⁻`.

use crate::discretization::Field;
use crate::eigensolver::{principal_eigenpair_with, EigenOptions, EigenWorkspace, Eigenpair};
use crate::error::{Error, Result};
use crate::functionals::{mass, normalize_to_manifold, weight_of, weighted_inner};
use crate::problem::Problem;

/// `h(u)`, with `v1(u)` from the principal eigenpair.
pub fn h_eval(problem: &Problem, u: &Field, opts: &EigenOptions) -> Result<f64> {
    Ok(h_value_with(problem, u, opts, &mut EigenWorkspace::new())?.0)
}

/// `h(u)` and the principal pair it was computed from.
pub fn h_value_with(
    problem: &Problem,
    u: &Field,
    opts: &EigenOptions,
    ws: &mut EigenWorkspace,
) -> Result<(f64, Eigenpair)> {
    let grid = problem.grid();
    let weight = weight_of(grid, u, problem.p())?;
    let pair = principal_eigenpair_with(problem.operator(), &weight, opts, ws)?;
    let h = weighted_inner(grid, &weight, u, &pair.v)?;
    Ok((h, pair))
}

#[derive(Debug, Clone)]
pub struct Projection {
    /// `normalize(t u⁺ - (1 - t) u⁻)` with `|h| <= tol_h`.
    pub u: Field,
    pub t: f64,
    pub h: f64,
    /// Root-finding evaluations after the bracket check.
    pub steps: usize,
    /// `h` at `t = 1` (pure positive part).
    pub h_positive_end: f64,
    /// `h` at `t = 0` (pure negative part).
    pub h_negative_end: f64,
    /// Principal pair of the returned field.
    pub pair: Eigenpair,
}

pub fn project_to_f(problem: &Problem, u: &Field, tol_h: f64) -> Result<Projection> {
    project_to_f_with(
        problem,
        u,
        tol_h,
        60,
        &EigenOptions::default(),
        &mut EigenWorkspace::new(),
    )
}

/// Finds `t` with `h(normalize(t u⁺ - (1 - t) u⁻)) = 0` by regula falsi with
/// the Illinois modification, keeping a sign-change bracket throughout.
pub fn project_to_f_with(
    problem: &Problem,
    u: &Field,
    tol_h: f64,
    max_steps: usize,
    opts: &EigenOptions,
    ws: &mut EigenWorkspace,
) -> Result<Projection> {
    let grid = problem.grid();
    let p = problem.p();
    grid.check_field(u)?;
    let pos = u.positive_part();
    let neg = u.negative_part();
    if !(mass(grid, &pos, p)? > 0.0) || !(mass(grid, &neg, p)? > 0.0) {
        return Err(Error::Precondition(
            "projection onto F needs a sign-changing field".into(),
        ));
    }
    let family = |t: f64| -> Result<Field> {
        let mixed = pos.zip_map(&neg, |a, b| t * a - (1.0 - t) * b)?;
        normalize_to_manifold(grid, &mixed, p)
    };
    let mut eval = |t: f64| -> Result<(f64, Field, Eigenpair)> {
        let f = family(t)?;
        let (h, pair) = h_value_with(problem, &f, opts, ws)?;
        Ok((h, f, pair))
    };

    let (h_positive_end, _, _) = eval(1.0)?;
    let (h_negative_end, _, _) = eval(0.0)?;
    if !(h_positive_end > 0.0) || !(h_negative_end < 0.0) {
        return Err(Error::Internal(format!(
            "bracket violation: h = {h_positive_end:e} at t = 1, {h_negative_end:e} at t = 0"
        )));
    }
    let (mut a, mut ha) = (0.0, h_negative_end);
    let (mut b, mut hb) = (1.0, h_positive_end);
    let mut t = 0.5;
    let mut side = 0i8;
    for steps in 1..=max_steps {
        let (h, f, pair) = eval(t)?;
        if h.abs() <= tol_h {
            return Ok(Projection {
                u: f,
                t,
                h,
                steps,
                h_positive_end,
                h_negative_end,
                pair,
            });
        }
        if h < 0.0 {
            a = t;
            ha = h;
            if side == -1 {
                hb *= 0.5;
            }
            side = -1;
        } else {
            b = t;
            hb = h;
            if side == 1 {
                ha *= 0.5;
            }
            side = 1;
        }
        t = (a * hb - b * ha) / (hb - ha);
        if !(t > a && t < b) {
            t = 0.5 * (a + b);
        }
        if b - a <= f64::EPSILON {
            return Err(Error::NotConverged {
                solver: "projection onto F",
                iterations: steps,
                residual: h.abs(),
            });
        }
    }
    Err(Error::NotConverged {
        solver: "projection onto F",
        iterations: max_steps,
        residual: ha.abs().min(hb.abs()),
    })
}

/// Closed-form zero of the stale functional `t ↦ ∫ |u_t|^{p-2} u_t v1` for a
/// fixed positive `v1`: along the family it equals
/// `t^{p-1} A⁺ - (1 - t)^{p-1} A⁻` up to a positive factor.
pub(super) fn stale_projection(cell: &[f64], u: &[f64], v1: &[f64], p: f64) -> Option<Vec<f64>> {
    let mut a_pos = 0.0;
    let mut a_neg = 0.0;
    for i in 0..u.len() {
        let m = cell[i] * crate::functionals::abs_pow(u[i], p - 1.0) * v1[i];
        if u[i] > 0.0 {
            a_pos += m;
        } else {
            a_neg += m;
        }
    }
    if !(a_pos > 0.0) || !(a_neg > 0.0) {
        return None;
    }
    // t / (1 - t) = (A⁻ / A⁺)^{1/(p-1)}
    let ratio = (a_neg / a_pos).powf(1.0 / (p - 1.0));
    let t = ratio / (1.0 + ratio);
    Some(
        u.iter()
            .map(|&x| if x > 0.0 { t * x } else { (1.0 - t) * x })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{Grid, GridMode};
    use crate::variational::{ground_state, DescentOptions};

    fn well() -> Problem {
        let g = Grid::new(GridMode::Cartesian1d, 15.0, 0.01).unwrap();
        let v = Field::from_fn(&g, |n| 1.0 - 0.3 * (-0.5 * n.radius).exp());
        Problem::new(&g, &v, 4.0, 1.0).unwrap()
    }

    fn shifted(problem: &Problem, w: &Field, s: f64) -> Field {
        crate::variational::nodal::shift_along_x(problem.grid(), w, s)
    }

    #[test]
    fn h_of_ground_state_is_one_and_odd() {
        let pr = well();
        let gs = ground_state(&pr, None, &DescentOptions::default()).unwrap();
        let w = gs.state();
        let opts = EigenOptions::default();
        let h = h_eval(&pr, w, &opts).unwrap();
        assert!((h - 1.0).abs() <= 1e-4, "{h}");
        assert_eq!(h_eval(&pr, &-w, &opts).unwrap(), -h);
    }

    #[test]
    fn antisymmetric_pair_is_already_in_f() {
        let pr = well();
        let gs = ground_state(&pr, None, &DescentOptions::default()).unwrap();
        let w = gs.state();
        let u = shifted(&pr, w, 3.0)
            .add_scaled(-1.0, &shifted(&pr, w, -3.0))
            .unwrap();
        let u = normalize_to_manifold(pr.grid(), &u, 4.0).unwrap();
        assert!(h_eval(&pr, &u, &EigenOptions::default()).unwrap().abs() <= 1e-8);
        let proj = project_to_f(&pr, &u, 1e-10).unwrap();
        assert!((proj.t - 0.5).abs() <= 1e-8, "{}", proj.t);
        let diff = proj.u.add_scaled(-1.0, &u).unwrap();
        assert!(diff.max_abs() <= 1e-8);
    }

    #[test]
    fn unbalanced_pair_is_rebalanced() {
        let pr = well();
        let gs = ground_state(&pr, None, &DescentOptions::default()).unwrap();
        let w = gs.state();
        let u = shifted(&pr, w, 3.0)
            .scaled(2.0)
            .add_scaled(-1.0, &shifted(&pr, w, -3.0))
            .unwrap();
        let proj = project_to_f(&pr, &u, 1e-10).unwrap();
        assert!(proj.h_positive_end > 0.0 && proj.h_negative_end < 0.0);
        assert!(proj.t < 0.5, "{}", proj.t);
        assert!(proj.h.abs() <= 1e-10);
        assert!(proj.steps <= 60);
        let i = mass(pr.grid(), &proj.u, 4.0).unwrap();
        assert!((i - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn positive_field_is_rejected() {
        let pr = well();
        let u = Field::from_fn(pr.grid(), |n| (-n.radius).exp());
        assert!(matches!(
            project_to_f(&pr, &u, 1e-10),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn stale_root_balances_the_parts() {
        let cell = [1.0; 4];
        let u = [2.0, 1.0, -1.0, -1.0];
        let v1 = [1.0; 4];
        let r = stale_projection(&cell, &u, &v1, 4.0).unwrap();
        let h: f64 = r.iter().map(|x| x.abs() * x.abs() * x).sum();
        assert!(h.abs() <= 1e-14, "{h}");
        assert!(stale_projection(&cell, &[1.0, 1.0, 0.0, 0.0], &v1, 4.0).is_none());
    }
}
