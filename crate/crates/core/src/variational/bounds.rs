use serde::{Deserialize, Serialize};

use crate::discretization::Field;
use crate::eigensolver::{
    principal_eigenpair_with, second_eigenpair_with, EigenOptions, EigenWorkspace,
};
use crate::error::{Error, Result};
use crate::functionals::{normalize_to_manifold, weight_of};
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopBound {
    /// `max_θ J(normalize(v1 cos θ + v2 sin θ))`
    pub value: f64,
    pub theta_max: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub samples: Vec<f64>,
}

/// Upper bound for `λ2` from the odd loop spanned by `v1(u)` and `v2(u)`,
/// sampled at `θ = 2πk/n`.
pub fn loop_minimax_upper(
    problem: &Problem,
    u: &Field,
    n: usize,
    opts: &EigenOptions,
) -> Result<LoopBound> {
    if n < 4 {
        return Err(Error::Config(format!(
            "loop needs at least 4 samples, got {n}"
        )));
    }
    let grid = problem.grid();
    let p = problem.p();
    let u = normalize_to_manifold(grid, u, p)?;
    let weight = weight_of(grid, &u, p)?;
    let mut ws = EigenWorkspace::new();
    let first = principal_eigenpair_with(problem.operator(), &weight, opts, &mut ws)?;
    let second = second_eigenpair_with(problem.operator(), &weight, &first, opts, &mut ws)?;
    let mut samples = Vec::with_capacity(n);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..n {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let v = first
            .v
            .zip_map(&second.v, |a, b| a * theta.cos() + b * theta.sin())?;
        let v = normalize_to_manifold(grid, &v, p).map_err(|e| {
            Error::Internal(format!("loop sample at θ = {theta} is degenerate: {e}"))
        })?;
        let j = crate::functionals::energy(problem.operator(), &v)?;
        if j > best.0 {
            best = (j, theta);
        }
        samples.push(j);
    }
    Ok(LoopBound {
        value: best.0,
        theta_max: best.1,
        mu1: first.mu,
        mu2: second.mu,
        samples,
    })
}

/// `(λ1∞, (λ1^q + λ1∞^q)^{1/q})` with `q = p/(p-2)`.
pub fn lambda2_bounds(lambda1: f64, lambda1_inf: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 2.0) {
        return Err(Error::Config(format!("exponent p = {p} must exceed 2")));
    }
    if !(lambda1 > 0.0) || !(lambda1 <= lambda1_inf) {
        return Err(Error::Config(format!(
            "need 0 < λ1 <= λ1∞, got λ1 = {lambda1}, λ1∞ = {lambda1_inf}"
        )));
    }
    let q = p / (p - 2.0);
    let ratio = lambda1 / lambda1_inf;
    Ok((
        lambda1_inf,
        lambda1_inf * (1.0 + ratio.powf(q)).powf(1.0 / q),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{Grid, GridMode};

    #[test]
    fn sandwich_arithmetic() {
        let l = 4.0 / 3f64.sqrt();
        let (lo, hi) = lambda2_bounds(l, l, 4.0).unwrap();
        assert_eq!(lo, l);
        assert!((hi - 3.26599).abs() < 1e-5, "{hi}");
        let (lo, hi) = lambda2_bounds(1e-9, l, 4.0).unwrap();
        assert!(hi - lo < 1e-12);
        let (lo, hi) = lambda2_bounds(0.7, 1.0, 3.0).unwrap();
        assert!(lo < hi);
        assert!(lambda2_bounds(2.0, 1.0, 4.0).is_err());
        assert!(lambda2_bounds(0.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn loop_bound_below_second_eigenvalue() {
        let g = Grid::new(GridMode::Cartesian1d, 10.0, 0.02).unwrap();
        let pr = Problem::new(&g, &Field::constant(&g, 1.0), 4.0, 1.0).unwrap();
        let u = Field::from_fn(&g, |n| {
            (-(n.coords[0] - 0.7).powi(2)).exp() - 0.5 * (-(n.coords[0] + 1.5).powi(2)).exp()
        });
        let b = loop_minimax_upper(&pr, &u, 64, &EigenOptions::default()).unwrap();
        assert!(b.value <= b.mu2 * (1.0 + 1e-8), "{} > {}", b.value, b.mu2);
        assert!(b.mu1 < b.mu2);
    }
}
