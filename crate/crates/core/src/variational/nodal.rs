use crate::discretization::{Field, Grid, GridMode};
use crate::eigensolver::{principal_eigenpair_with, EigenWorkspace};
use crate::error::{Error, Result};
use crate::functionals::{abs_pow, mass, normalize_to_manifold, weight_of};
use crate::problem::Problem;
use crate::verification::{nodality, residual_eq};

use super::descent::{energy_change, line_search, normalize_raw, tangent_direction, LineSearch};
use super::dual::{h_value_with, project_to_f_with, stale_projection};
use super::{DescentOptions, Level, SolveFlags, SolveReport};

/// Starting point of the nodal descent.
#[derive(Debug, Clone)]
pub enum NodalSeed {
    /// Two opposite bumps built from a ground-state profile, rebuilt with a
    /// wider separation when the descent leaves the sign-changing class.
    TwoBump {
        profile: Field,
        separation: f64,
    },
    Field(Field),
}

impl NodalSeed {
    /// Two-bump seed at the default separation `3/sqrt(V∞)`.
    pub fn two_bump(problem: &Problem, profile: Field) -> Self {
        NodalSeed::TwoBump {
            profile,
            separation: 3.0 / problem.v_inf().sqrt(),
        }
    }
}

/// Linear interpolation of nodal values on the axis, zero past the Dirichlet
/// boundary. In radial mode the value at the first node extends to `r = 0`.
fn interpolate(grid: &Grid, values: impl Fn(usize) -> f64, x: f64) -> f64 {
    let axis = grid.axis();
    let h = grid.spacing();
    let first = axis[0];
    let last = axis[axis.len() - 1];
    let radial = matches!(grid.mode(), GridMode::Radial { .. });
    if radial && x <= first {
        return values(0);
    }
    if x.abs() >= grid.half_width() {
        return 0.0;
    }
    if x < first {
        return values(0) * (x + grid.half_width()) / (first + grid.half_width());
    }
    if x > last {
        return values(axis.len() - 1) * (grid.half_width() - x) / (grid.half_width() - last);
    }
    let s = (x - first) / h;
    let i = (s.floor() as usize).min(axis.len() - 2);
    let f = s - i as f64;
    values(i) * (1.0 - f) + values(i + 1) * f
}

/// `u(x - s e1)` by linear interpolation along the first axis.
pub(crate) fn shift_along_x(grid: &Grid, u: &Field, s: f64) -> Field {
    let n = grid.axis().len();
    let vals = u.values();
    match grid.mode() {
        GridMode::Cartesian2d => Field::from_fn(grid, |node| {
            // row of this node
            let row = grid
                .axis()
                .partition_point(|&y| y < node.coords[1] - 0.5 * grid.spacing());
            interpolate(grid, |i| vals[row * n + i], node.coords[0] - s)
        }),
        _ => Field::from_fn(grid, |node| {
            interpolate(grid, |i| vals[i], node.coords[0] - s)
        }),
    }
}

/// `w(x) - w(x - s e1)` on cartesian grids: the profile where it sits and an
/// opposite copy at distance `s`. In radial mode, where translations are
/// unavailable, `w(r) - w(|r - s|)`: a core and a ring of opposite signs.
///
/// An odd pair `w(x - s e1) - w(x + s e1)` is not used: every step of the
/// descent preserves that symmetry in a symmetric potential, and the odd
/// class carries its own critical point above `inf_F J`.
pub fn two_bump_seed(problem: &Problem, profile: &Field, separation: f64) -> Result<Field> {
    let grid = problem.grid();
    grid.check_field(profile)?;
    if !(separation > 0.0) || separation >= grid.half_width() {
        return Err(Error::Config(format!(
            "bump separation {separation} must lie in (0, R = {})",
            grid.half_width()
        )));
    }
    let seed = match grid.mode() {
        GridMode::Radial { .. } => {
            let vals = profile.values();
            Field::from_fn(grid, |n| {
                interpolate(grid, |i| vals[i], n.radius)
                    - interpolate(grid, |i| vals[i], (n.radius - separation).abs())
            })
        }
        _ => profile.add_scaled(-1.0, &shift_along_x(grid, profile, separation))?,
    };
    normalize_to_manifold(grid, &seed, problem.p())
}

/// Distance between the centroids of `(u⁺)^p` and `(u⁻)^p`; radius centroids in radial mode.
fn separation(grid: &Grid, u: &[f64], p: f64) -> f64 {
    let mut m = [0.0; 2];
    let mut c = [[0.0; 2]; 2];
    for (i, (&x, &w)) in u.iter().zip(grid.weights()).enumerate() {
        let side = usize::from(x < 0.0);
        let mass = w * abs_pow(x, p);
        if mass == 0.0 {
            continue;
        }
        let node = grid.node(i);
        let at = match grid.mode() {
            GridMode::Radial { .. } => [node.radius, 0.0],
            _ => node.coords,
        };
        m[side] += mass;
        c[side][0] += mass * at[0];
        c[side][1] += mass * at[1];
    }
    if m[0] == 0.0 || m[1] == 0.0 {
        return 0.0;
    }
    let dx = c[0][0] / m[0] - c[1][0] / m[1];
    let dy = c[0][1] / m[0] - c[1][1] / m[1];
    dx.hypot(dy)
}

fn is_sign_changing(grid: &Grid, u: &[f64], p: f64, delta: f64) -> bool {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (&x, &w) in u.iter().zip(grid.weights()) {
        let m = w * abs_pow(x, p);
        if x > 0.0 {
            pos += m;
        } else {
            neg += m;
        }
    }
    let threshold = delta * (pos + neg);
    pos.min(neg) >= threshold && threshold > 0.0
}

/// One step of inverse iteration `v ← S^{-1} D(u) v`, keeping `v > 0`.
fn refresh_v1(problem: &Problem, u: &[f64], v1: &mut Vec<f64>) {
    let cell = problem.grid().weights();
    let p = problem.p();
    {
        let mut y: Vec<f64> = (0..u.len())
            .map(|i| cell[i] * abs_pow(u[i], p - 2.0) * v1[i])
            .collect();
        problem.operator().solve_stiffness_in_place(&mut y);
        let scale = y.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale > 0.0 {
            y.iter_mut().for_each(|x| *x /= scale);
            *v1 = y;
        }
    }
}

/// Jump along the slow mode: when consecutive steps satisfy
/// `s_k ≈ ρ s_{k-1}` with `ρ` close to one, the geometric tail sums to
/// `ρ/(1-ρ) s_k`. The jump is kept only if it lowers `J` and stays nodal.
fn extrapolate(
    problem: &Problem,
    u: &[f64],
    j: f64,
    step: &[f64],
    prev: &[f64],
    v1: &[f64],
    delta: f64,
) -> Option<(Vec<f64>, f64)> {
    let grid = problem.grid();
    let cell = grid.weights();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut ss = 0.0;
    for i in 0..u.len() {
        num += cell[i] * step[i] * prev[i];
        den += cell[i] * prev[i] * prev[i];
        ss += cell[i] * step[i] * step[i];
    }
    if !(den > 0.0) {
        return None;
    }
    let rho = num / den;
    // the two steps must be nearly parallel for the geometric model to hold
    let cosine = num / (den * ss).sqrt();
    if rho < 0.5 || cosine < 0.99 {
        return None;
    }
    // ρ ≥ 1 is the drift regime: steps of constant length, no geometric tail
    let mut factor = if rho < 1.0 {
        (rho / (1.0 - rho)).min(1000.0)
    } else {
        1000.0
    };
    while factor >= 2.0 {
        let y: Vec<f64> = u.iter().zip(step).map(|(a, s)| a + factor * s).collect();
        factor /= 4.0;
        let Some(y) = normalize_raw(problem, y) else {
            continue;
        };
        if !is_sign_changing(grid, &y, problem.p(), delta) {
            continue;
        }
        let Some(y) = stale_projection(cell, &y, v1, problem.p()) else {
            continue;
        };
        let Some(y) = normalize_raw(problem, y) else {
            continue;
        };
        let dj = energy_change(problem, &y, u);
        if dj < 0.0 {
            return Some((y, j + dj));
        }
    }
    None
}

enum Run {
    Finished(Box<SolveReport>),
    LeftClass { iterations: usize },
}

/// Minimizes `J` over `M ∩ F`: descent steps on `M`, each followed by the
/// projection onto `F` computed with the previous iterate's `v1`. The exact
/// projection is applied to the seed and to the final iterate.
///
/// A run whose residual stops improving while the bumps drift apart is
/// reported with `converged = false` and the diagnosis "mass escape".
pub fn nodal_minimax(
    problem: &Problem,
    seed: NodalSeed,
    opts: &DescentOptions,
) -> Result<SolveReport> {
    let mut seed = seed;
    for restart in 0..=opts.max_restarts {
        let start = match &seed {
            NodalSeed::TwoBump {
                profile,
                separation,
            } => two_bump_seed(problem, profile, *separation)?,
            NodalSeed::Field(f) => f.clone(),
        };
        match run(problem, &start, opts)? {
            Run::Finished(report) => {
                return Ok(SolveReport {
                    restarts: restart,
                    ..*report
                });
            }
            Run::LeftClass { iterations } => {
                log::warn!(
                    "nodal descent left the sign-changing class after {iterations} iterations"
                );
                match &mut seed {
                    NodalSeed::TwoBump { separation, .. } => *separation *= 1.5,
                    NodalSeed::Field(_) => {
                        return Err(Error::Degenerate(
                            "nodal descent left the sign-changing class".into(),
                        ))
                    }
                }
            }
        }
    }
    Err(Error::Degenerate(format!(
        "nodal descent left the sign-changing class after {} restarts",
        opts.max_restarts
    )))
}

fn run(problem: &Problem, seed: &Field, opts: &DescentOptions) -> Result<Run> {
    let grid = problem.grid();
    let p = problem.p();
    let op = problem.operator();
    grid.check_field(seed)?;
    if !nodality(grid, seed, p, opts.nodal_delta)?.is_nodal {
        return Err(Error::Precondition(
            "nodal seed is not sign-changing".into(),
        ));
    }
    let mut ws = EigenWorkspace::new();
    let start = project_to_f_with(
        problem,
        seed,
        opts.tol_h,
        opts.max_projection_steps,
        &opts.eigen,
        &mut ws,
    )?;
    let mut v1 = start.pair.v.values().to_vec();
    let mut u = start.u.into_values();
    let mut j = op.energy_form_unchecked(&u, &u);

    let mut j_history = Vec::new();
    let mut residual_history = Vec::new();
    let mut separation_history = Vec::new();
    let mut converged_inner = false;
    let mut diagnosis = None;
    let mut iterations = 0;
    let window = opts.plateau_window.max(2);
    let mut previous_step: Option<Vec<f64>> = None;
    loop {
        let field = Field::from_values(grid, u.clone())?;
        let res = residual_eq(op, &field, j, p)?;
        j_history.push(j);
        residual_history.push(res);
        separation_history.push(separation(grid, &u, p));
        if res <= opts.tol {
            converged_inner = true;
            break;
        }
        if iterations >= opts.max_iter {
            diagnosis = Some(format!("no convergence in {} iterations", opts.max_iter));
            break;
        }
        if iterations >= window && iterations % (window / 2).max(1) == 0 {
            let k = residual_history.len() - 1;
            let ratio = residual_history[k] / residual_history[k - window];
            if ratio > 0.5 {
                let sep = &separation_history[k - window..];
                let monotone = sep
                    .windows(2)
                    .all(|s| s[1] >= s[0] - 1e-12 * s[0].abs().max(1.0));
                if monotone && sep[sep.len() - 1] > sep[0] {
                    diagnosis = Some("mass escape".into());
                    break;
                }
            }
        }
        let dir = tangent_direction(problem, &u, j);
        let cell = grid.weights();
        let delta = opts.nodal_delta;
        let retract = |y: Vec<f64>, v1: &[f64]| {
            let y = normalize_raw(problem, y)?;
            if !is_sign_changing(grid, &y, p, delta) {
                return None;
            }
            normalize_raw(problem, stale_projection(cell, &y, v1, p)?)
        };
        let mut outcome = line_search(problem, &u, j, j, &dir, opts, |y| retract(y, &v1));
        if matches!(outcome, LineSearch::Failed { rejected } if rejected <= opts.max_backtracks / 2)
        {
            // near convergence the carried v1 may be too stale for the
            // projection; retry once with the exact principal eigenvector
            let weight = weight_of(grid, &Field::from_values(grid, u.clone())?, p)?;
            let pair = principal_eigenpair_with(op, &weight, &opts.eigen, &mut ws)?;
            v1 = pair.v.into_values();
            outcome = line_search(problem, &u, j, j, &dir, opts, |y| retract(y, &v1));
        }
        match outcome {
            LineSearch::Accepted { u: next, j: next_j } => {
                let step: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
                u = next;
                j = next_j;
                let due = opts.extrapolate_every > 0
                    && iterations > 0
                    && iterations % opts.extrapolate_every == 0;
                match previous_step.take() {
                    Some(prev) if due => {
                        if let Some((jumped, jj)) =
                            extrapolate(problem, &u, j, &step, &prev, &v1, delta)
                        {
                            log::debug!(
                                "extrapolated at iteration {iterations}: ΔJ = {:e}",
                                jj - j
                            );
                            u = jumped;
                            j = jj;
                        } else {
                            previous_step = Some(step);
                        }
                    }
                    _ => previous_step = Some(step),
                }
            }
            LineSearch::Failed { rejected } if rejected > opts.max_backtracks / 2 => {
                return Ok(Run::LeftClass { iterations });
            }
            LineSearch::Failed { .. } => {
                diagnosis = Some("line search stalled".into());
                break;
            }
        }
        refresh_v1(problem, &u, &mut v1);
        iterations += 1;
    }

    // exact projection of the final iterate
    let last = Field::from_values(grid, u)?;
    let last = if nodality(grid, &last, p, opts.nodal_delta)?.is_nodal {
        project_to_f_with(
            problem,
            &last,
            opts.tol_h,
            opts.max_projection_steps,
            &opts.eigen,
            &mut ws,
        )?
        .u
    } else {
        last
    };
    let lambda = op.energy_form_unchecked(last.values(), last.values());
    let residual = residual_eq(op, &last, lambda, p)?;
    let (h, _) = h_value_with(problem, &last, &opts.eigen, &mut EigenWorkspace::new())?;
    let nod = nodality(grid, &last, p, opts.nodal_delta)?;
    let on_m = (mass(grid, &last, p)? - 1.0).abs() <= 1e-10;
    let in_f = h.abs() <= opts.tol_h;
    let converged = converged_inner && residual <= opts.tol && in_f && nod.is_nodal;
    if converged_inner && !converged && diagnosis.is_none() {
        diagnosis = Some(format!(
            "final projection moved the iterate: residual {residual:.3e}, h = {h:.3e}"
        ));
    }
    let level = match grid.mode() {
        GridMode::Radial { .. } => Level::Lambda2Radial,
        _ => Level::Lambda2,
    };
    log::info!(
        "nodal minimax: λ = {lambda:.12}, residual {residual:.3e}, h = {h:.3e}, {iterations} iterations"
    );
    Ok(Run::Finished(Box::new(SolveReport {
        level,
        lambda,
        u: Some(last),
        residual,
        h_value: Some(h),
        iterations,
        j_history,
        residual_history,
        separation_history,
        flags: SolveFlags {
            on_m,
            in_f,
            nodal: nod.is_nodal,
            converged,
        },
        diagnosis,
        restarts: 0,
        pos_mass: Some(nod.pos_mass),
        neg_mass: Some(nod.neg_mass),
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_moves_a_bump() {
        let g = Grid::new(GridMode::Cartesian1d, 10.0, 0.05).unwrap();
        let u = Field::from_fn(&g, |n| (-n.coords[0] * n.coords[0]).exp());
        let s = shift_along_x(&g, &u, 2.0);
        let exact = Field::from_fn(&g, |n| (-(n.coords[0] - 2.0).powi(2)).exp());
        assert!(s.add_scaled(-1.0, &exact).unwrap().max_abs() <= 1e-3);
        let back = shift_along_x(&g, &u, 0.0);
        assert!(back.add_scaled(-1.0, &u).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn shift_in_two_dimensions_keeps_rows() {
        let g = Grid::new(GridMode::Cartesian2d, 4.0, 0.1).unwrap();
        let u = Field::from_fn(&g, |n| (-n.radius * n.radius).exp());
        let s = shift_along_x(&g, &u, 1.0);
        let exact = Field::from_fn(&g, |n| {
            (-(n.coords[0] - 1.0).powi(2) - n.coords[1].powi(2)).exp()
        });
        assert!(s.add_scaled(-1.0, &exact).unwrap().max_abs() <= 5e-3);
    }

    #[test]
    fn seeds_change_sign() {
        let g = Grid::new(GridMode::Radial { dim: 2 }, 10.0, 0.05).unwrap();
        let pr = Problem::new(&g, &Field::constant(&g, 1.0), 4.0, 1.0).unwrap();
        let w = Field::from_fn(&g, |n| 1.0 / n.radius.cosh());
        let seed = two_bump_seed(&pr, &w, 3.0).unwrap();
        assert!(nodality(&g, &seed, 4.0, 1e-3).unwrap().is_nodal);
        assert!(two_bump_seed(&pr, &w, 11.0).is_err());
    }

    #[test]
    fn separation_of_symmetric_bumps() {
        let g = Grid::new(GridMode::Cartesian1d, 10.0, 0.01).unwrap();
        let u = Field::from_fn(&g, |n| {
            (-(n.coords[0] - 2.0).powi(2)).exp() - (-(n.coords[0] + 2.0).powi(2)).exp()
        });
        assert!((separation(&g, u.values(), 4.0) - 4.0).abs() < 1e-3);
    }
}
