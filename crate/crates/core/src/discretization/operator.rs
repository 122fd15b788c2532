//! The discrete Schrödinger operator A = -Δ + V with zero Dirichlet data.
//!
//! The operator is assembled in flux form: `A = W^{-1} S`, where `W` holds the
//! cell measures of the grid and `S` is the symmetric stiffness matrix
//! (conductances between neighbouring nodes plus `V W` on the diagonal).
//! Hence `integrate(u * A v) = u^T S v` is symmetric, and `S` is an
//! irreducible M-matrix, so `S^{-1}` is entrywise positive.

use crate::discretization::banded::BandCholesky;
use crate::discretization::field::Field;
use crate::discretization::grid::{sphere_surface, Grid, GridMode};
use crate::error::{Error, Result};

/// Default relative tolerance of the conjugate gradient solve.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
/// Default iteration cap of the conjugate gradient solve.
pub const DEFAULT_SOLVE_MAX_ITER: usize = 50_000;

/// Tridiagonal graph Laplacian along a chain of nodes.
#[derive(Debug, Clone)]
struct Chain {
    diag: Vec<f64>,
    /// conductance between node i and i + 1
    cond: Vec<f64>,
}

impl Chain {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s -= self.cond[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s -= self.cond[i] * v[i + 1];
            }
            out[i] = s;
        }
    }
}

#[derive(Debug, Clone)]
enum Laplacian {
    Chain(Chain),
    /// `L ⊗ M + M ⊗ L` on a square tensor grid.
    Tensor {
        chain: Chain,
        mass: Vec<f64>,
    },
}

impl Laplacian {
    fn new(grid: &Grid) -> Self {
        let h = grid.spacing();
        let n = grid.axis().len();
        match grid.mode() {
            GridMode::Cartesian1d => Laplacian::Chain(uniform_chain(n, h)),
            GridMode::Cartesian2d => Laplacian::Tensor {
                chain: uniform_chain(n, h),
                mass: grid.axis_weights().to_vec(),
            },
            GridMode::Radial { dim } => {
                let sigma = sphere_surface(dim);
                let face = |r: f64| sigma * r.powi(dim as i32 - 1) / h;
                let cond: Vec<f64> = (0..n - 1).map(|i| face((i as f64 + 1.5) * h)).collect();
                let mut diag = vec![0.0; n];
                for (i, c) in cond.iter().enumerate() {
                    diag[i] += c;
                    diag[i + 1] += c;
                }
                // Dirichlet face at r = R; the face at r = 0 has zero area.
                diag[n - 1] += face(grid.half_width() - 0.5 * h);
                Laplacian::Chain(Chain { diag, cond })
            }
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Laplacian::Chain(chain) => chain.apply(v, out),
            Laplacian::Tensor { chain, mass } => {
                let n = mass.len();
                let mut line = vec![0.0; n];
                let mut res = vec![0.0; n];
                // rows (x direction)
                for j in 0..n {
                    let row = &v[j * n..(j + 1) * n];
                    chain.apply(row, &mut res);
                    for i in 0..n {
                        out[j * n + i] = mass[j] * res[i];
                    }
                }
                // columns (y direction)
                for i in 0..n {
                    for j in 0..n {
                        line[j] = v[j * n + i];
                    }
                    chain.apply(&line, &mut res);
                    for j in 0..n {
                        out[j * n + i] += mass[i] * res[j];
                    }
                }
            }
        }
    }

    fn for_each_edge(&self, mut f: impl FnMut(usize, usize, f64)) {
        match self {
            Laplacian::Chain(chain) => {
                for (i, &c) in chain.cond.iter().enumerate() {
                    f(i, i + 1, c);
                }
            }
            Laplacian::Tensor { chain, mass } => {
                let n = mass.len();
                for (j, &mj) in mass.iter().enumerate() {
                    for (i, &c) in chain.cond.iter().enumerate() {
                        f(j * n + i, j * n + i + 1, mj * c);
                    }
                }
                for (j, &c) in chain.cond.iter().enumerate() {
                    for (i, &mi) in mass.iter().enumerate() {
                        f(j * n + i, (j + 1) * n + i, mi * c);
                    }
                }
            }
        }
    }

    fn bandwidth(&self) -> usize {
        match self {
            Laplacian::Chain(_) => 1,
            Laplacian::Tensor { mass, .. } => mass.len(),
        }
    }

    /// `S[i][i - k]` of the Laplacian part.
    fn entry(&self, i: usize, k: usize) -> f64 {
        match self {
            Laplacian::Chain(chain) => match k {
                0 => chain.diag[i],
                1 => -chain.cond[i - 1],
                _ => 0.0,
            },
            Laplacian::Tensor { chain, mass } => {
                let n = mass.len();
                let (x, y) = (i % n, i / n);
                if k == 0 {
                    mass[y] * chain.diag[x] + mass[x] * chain.diag[y]
                } else if k == 1 && x > 0 {
                    -mass[y] * chain.cond[x - 1]
                } else if k == n {
                    -mass[x] * chain.cond[y - 1]
                } else {
                    0.0
                }
            }
        }
    }
}

fn uniform_chain(n: usize, h: f64) -> Chain {
    // interior faces and the two Dirichlet faces all have conductance 1/h
    Chain {
        diag: vec![2.0 / h; n],
        cond: vec![1.0 / h; n - 1],
    }
}

/// `A = -Δ + V` on a fixed grid and potential, with a cached factorization.
#[derive(Debug, Clone)]
pub struct SchrodingerOperator {
    grid: Grid,
    potential: Field,
    laplacian: Laplacian,
    /// V_i W_i
    mass_potential: Vec<f64>,
    factor: BandCholesky,
}

impl SchrodingerOperator {
    pub fn new(grid: &Grid, potential: &Field) -> Result<Self> {
        grid.check(potential.grid_id())?;
        check_nonnegative(potential)?;
        let laplacian = Laplacian::new(grid);
        let mass_potential: Vec<f64> = potential
            .values()
            .iter()
            .zip(grid.weights())
            .map(|(v, w)| v * w)
            .collect();
        let factor = BandCholesky::factor(grid.len(), laplacian.bandwidth(), |i, k| {
            let lap = laplacian.entry(i, k);
            if k == 0 {
                lap + mass_potential[i]
            } else {
                lap
            }
        })?;
        Ok(SchrodingerOperator {
            grid: grid.clone(),
            potential: potential.clone(),
            laplacian,
            mass_potential,
            factor,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    /// `S v`: the stiffness matrix, i.e. `W A v`.
    pub(crate) fn stiffness_raw(&self, v: &[f64], out: &mut [f64]) {
        self.laplacian.apply(v, out);
        for ((o, m), x) in out.iter_mut().zip(&self.mass_potential).zip(v) {
            *o += m * x;
        }
    }

    pub(crate) fn stiffness_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.stiffness_raw(v, &mut out);
        out
    }

    /// Visits every interior edge `(i, j)` with its conductance.
    pub fn for_each_edge(&self, f: impl FnMut(usize, usize, f64)) {
        self.laplacian.for_each_edge(f);
    }

    /// Nodewise `(A v)`.
    pub fn apply(&self, v: &Field) -> Result<Field> {
        self.grid.check(v.grid_id())?;
        Ok(self.apply_unchecked(v))
    }

    pub(crate) fn apply_unchecked(&self, v: &Field) -> Field {
        let mut out = self.stiffness_vec(v.values());
        for (o, w) in out.iter_mut().zip(self.grid.weights()) {
            *o /= w;
        }
        Field::from_raw(v.grid_id(), out)
    }

    /// Bilinear energy form `integrate(u * A v)`.
    pub fn energy_form(&self, u: &Field, v: &Field) -> Result<f64> {
        self.grid.check(u.grid_id())?;
        self.grid.check(v.grid_id())?;
        Ok(self.energy_form_unchecked(u.values(), v.values()))
    }

    pub(crate) fn energy_form_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        let sv = self.stiffness_vec(v);
        u.iter().zip(&sv).map(|(a, b)| a * b).sum()
    }

    /// Solves `A v = rhs` with the cached band Cholesky factor.
    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        self.grid.check(rhs.grid_id())?;
        let mut x: Vec<f64> = rhs
            .values()
            .iter()
            .zip(self.grid.weights())
            .map(|(r, w)| r * w)
            .collect();
        self.factor.solve_in_place(&mut x);
        Ok(Field::from_raw(rhs.grid_id(), x))
    }

    /// Solves `S x = b` for a right-hand side already multiplied by the cell measures.
    pub(crate) fn solve_stiffness_in_place(&self, b: &mut [f64]) {
        self.factor.solve_in_place(b);
    }

    /// Smallest eigenvalue of `A` (in the quadrature inner product), by
    /// inverse iteration. Positive by construction; this is the discrete
    /// coercivity constant of the energy norm with respect to L².
    pub fn coercivity_estimate(&self) -> f64 {
        let w = self.grid.weights();
        let mut x: Vec<f64> = self
            .grid
            .nodes()
            .map(|n| 1.0 + 0.1 * n.coords[0] / self.grid.half_width())
            .collect();
        let mut rq = f64::INFINITY;
        for _ in 0..500 {
            let mut y: Vec<f64> = x.iter().zip(w).map(|(a, b)| a * b).collect();
            self.factor.solve_in_place(&mut y);
            let sy = self.stiffness_vec(&y);
            let num: f64 = y.iter().zip(&sy).map(|(a, b)| a * b).sum();
            let den: f64 = y.iter().zip(w).map(|(a, b)| a * a * b).sum();
            let next = num / den;
            let scale = den.sqrt();
            x = y.iter().map(|v| v / scale).collect();
            if (rq - next).abs() <= 1e-13 * next {
                return next;
            }
            rq = next;
        }
        rq
    }
}

fn check_nonnegative(potential: &Field) -> Result<()> {
    if let Some((i, v)) = potential
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| **v < 0.0)
    {
        return Err(Error::Hypothesis {
            condition: "V(x) >= 0",
            detail: format!("potential is {v} at node {i}"),
        });
    }
    Ok(())
}

/// Nodewise `(-Δ_h + V) v`.
pub fn apply_operator(grid: &Grid, potential: &Field, v: &Field) -> Result<Field> {
    grid.check(potential.grid_id())?;
    grid.check(v.grid_id())?;
    check_nonnegative(potential)?;
    let lap = Laplacian::new(grid);
    let mut out = vec![0.0; grid.len()];
    lap.apply(v.values(), &mut out);
    let w = grid.weights();
    for i in 0..out.len() {
        out[i] = out[i] / w[i] + potential.values()[i] * v.values()[i];
    }
    Ok(Field::from_raw(grid.id(), out))
}

/// Quadrature sum `Σ w_i f_i`.
pub fn integrate(grid: &Grid, f: &Field) -> Result<f64> {
    grid.check(f.grid_id())?;
    Ok(dot_weighted(grid.weights(), f.values(), None))
}

/// `integrate(f * g)`.
pub fn inner(grid: &Grid, f: &Field, g: &Field) -> Result<f64> {
    grid.check(f.grid_id())?;
    grid.check(g.grid_id())?;
    Ok(dot_weighted(grid.weights(), f.values(), Some(g.values())))
}

/// Quadrature L² norm.
pub fn norm_l2(grid: &Grid, f: &Field) -> Result<f64> {
    Ok(inner(grid, f, f)?.sqrt())
}

pub(crate) fn dot_weighted(w: &[f64], f: &[f64], g: Option<&[f64]>) -> f64 {
    match g {
        Some(g) => w.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum(),
        None => w.iter().zip(f).map(|(w, a)| w * a).sum(),
    }
}

/// Solves `A v = rhs` by Jacobi-preconditioned conjugate gradients.
///
/// Converged when `‖A v - rhs‖₂ <= tol ‖rhs‖₂` in the quadrature norm.
pub fn solve_operator(grid: &Grid, potential: &Field, rhs: &Field, tol: f64) -> Result<Field> {
    solve_operator_capped(grid, potential, rhs, tol, DEFAULT_SOLVE_MAX_ITER)
}

pub fn solve_operator_capped(
    grid: &Grid,
    potential: &Field,
    rhs: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<Field> {
    grid.check(potential.grid_id())?;
    grid.check(rhs.grid_id())?;
    check_nonnegative(potential)?;
    let lap = Laplacian::new(grid);
    let w = grid.weights();
    let n = grid.len();
    let vw: Vec<f64> = potential
        .values()
        .iter()
        .zip(w)
        .map(|(v, w)| v * w)
        .collect();
    let apply_s = |x: &[f64], out: &mut [f64]| {
        lap.apply(x, out);
        for i in 0..n {
            out[i] += vw[i] * x[i];
        }
    };
    let diag: Vec<f64> = (0..n).map(|i| lap.entry(i, 0) + vw[i]).collect();
    // residual norm of A x - rhs in the quadrature norm, from r = S x - W rhs
    let a_residual =
        |r: &[f64]| -> f64 { r.iter().zip(w).map(|(r, w)| r * r / w).sum::<f64>().sqrt() };

    let rhs_norm = dot_weighted(w, rhs.values(), Some(rhs.values())).sqrt();
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(Field::from_raw(grid.id(), x));
    }
    let mut r: Vec<f64> = rhs.values().iter().zip(w).map(|(b, w)| b * w).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut sp = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let target = tol * rhs_norm;
    let mut res = a_residual(&r);
    for _ in 0..max_iter {
        if res <= target {
            return Ok(Field::from_raw(grid.id(), x));
        }
        apply_s(&p, &mut sp);
        let psp: f64 = p.iter().zip(&sp).map(|(a, b)| a * b).sum();
        let alpha = rz / psp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * sp[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = a_residual(&r);
    }
    // recompute the true residual before giving up
    let mut sx = vec![0.0; n];
    apply_s(&x, &mut sx);
    let true_r: Vec<f64> = (0..n).map(|i| sx[i] - w[i] * rhs.values()[i]).collect();
    let res = a_residual(&true_r);
    if res <= target {
        return Ok(Field::from_raw(grid.id(), x));
    }
    Err(Error::NotConverged {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: res / rhs_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1d(r: f64, h: f64) -> Grid {
        Grid::new(GridMode::Cartesian1d, r, h).unwrap()
    }

    #[test]
    fn quadratic_is_differentiated_exactly() {
        let g = grid1d(2.0, 0.125);
        let v = Field::from_fn(&g, |n| n.coords[0] * n.coords[0]);
        let av = apply_operator(&g, &Field::zeros(&g), &v).unwrap();
        let n = g.len();
        for &a in &av.values()[1..n - 1] {
            assert!((a + 2.0).abs() < 1e-11, "{a}");
        }
    }

    #[test]
    fn potential_enters_linearly() {
        let g = grid1d(2.0, 0.125);
        let v = Field::from_fn(&g, |n| (3.0 * n.coords[0]).cos() + n.coords[0]);
        let a1 = apply_operator(&g, &Field::constant(&g, 1.0), &v).unwrap();
        let a0 = apply_operator(&g, &Field::zeros(&g), &v).unwrap();
        let diff = a1.add_scaled(-1.0, &a0).unwrap();
        for (d, x) in diff.values().iter().zip(v.values()) {
            assert!((d - x).abs() < 1e-12 * (1.0 + x.abs()) * 64.0);
        }
    }

    #[test]
    fn radial_constant_and_quadratic() {
        // -Δ(1 - r²) = 2N in N dimensions; exact for the flux form away from r = R
        for dim in [2u32, 3] {
            let g = Grid::new(GridMode::Radial { dim }, 2.0, 0.05).unwrap();
            let v = Field::from_fn(&g, |n| 1.0 - n.radius * n.radius);
            let av = apply_operator(&g, &Field::zeros(&g), &v).unwrap();
            let n = g.len();
            for (i, &a) in av.values()[..n - 1].iter().enumerate().skip(1) {
                assert!(
                    (a - 2.0 * dim as f64).abs() < 1e-8,
                    "dim {dim} node {i}: {a}"
                );
            }
            if dim == 2 {
                assert!((av.values()[0] - 4.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn integrate_constant_measures_domain() {
        let g = grid1d(15.0, 0.005);
        let total = integrate(&g, &Field::constant(&g, 1.0)).unwrap();
        assert!((total - 30.0).abs() < 1e-10);
        let g = Grid::new(GridMode::Radial { dim: 2 }, 1.0, 0.125).unwrap();
        let area = integrate(&g, &Field::constant(&g, 1.0)).unwrap();
        assert!((area - PI).abs() < 1e-12);
    }

    #[test]
    fn integrate_sech4() {
        let g = grid1d(15.0, 0.005);
        let f = Field::from_fn(&g, |n| n.coords[0].cosh().powi(-4));
        let val = integrate(&g, &f).unwrap();
        assert!((val - 4.0 / 3.0).abs() < 1e-6, "{val}");
    }

    #[test]
    fn operator_is_symmetric_and_solves() {
        let g = Grid::new(GridMode::Cartesian2d, 2.0, 0.25).unwrap();
        let pot = Field::from_fn(&g, |n| 1.0 - 0.3 * (-0.5 * n.radius).exp());
        let op = SchrodingerOperator::new(&g, &pot).unwrap();
        let u = Field::from_fn(&g, |n| (n.coords[0] * 1.3).sin() + n.coords[1]);
        let v = Field::from_fn(&g, |n| (n.coords[1] * 0.7 - n.coords[0]).cos());
        let uav = inner(&g, &u, &op.apply(&v).unwrap()).unwrap();
        let vau = inner(&g, &v, &op.apply(&u).unwrap()).unwrap();
        assert!((uav - vau).abs() <= 1e-12 * uav.abs().max(1.0));

        let rhs = op.apply(&u).unwrap();
        let direct = op.solve(&rhs).unwrap();
        let cg = solve_operator(&g, &pot, &rhs, 1e-12).unwrap();
        for ((a, b), c) in direct.values().iter().zip(cg.values()).zip(u.values()) {
            assert!((a - c).abs() < 1e-10);
            assert!((b - c).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = grid1d(2.0, 0.125);
        let x = solve_operator(&g, &Field::constant(&g, 1.0), &Field::zeros(&g), 1e-10).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn capped_cg_reports_nonconvergence() {
        let g = grid1d(15.0, 0.005);
        let rhs = Field::from_fn(&g, |n| (-n.coords[0] * n.coords[0]).exp());
        let err = solve_operator_capped(&g, &Field::constant(&g, 1.0), &rhs, 1e-12, 3).unwrap_err();
        match err {
            Error::NotConverged { residual, .. } => assert!(residual > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_potential_is_rejected() {
        let g = grid1d(2.0, 0.125);
        let pot = Field::from_fn(&g, |n| n.coords[0]);
        assert!(matches!(
            SchrodingerOperator::new(&g, &pot),
            Err(Error::Hypothesis { .. })
        ));
    }
}
