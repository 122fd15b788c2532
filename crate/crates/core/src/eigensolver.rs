//! Weighted linearized eigenproblem `A v = μ |u|^{p-2} v`.
//!
//! In matrix form this is the pencil `S v = μ D v` with `S` the stiffness
//! matrix and `D = diag(cell_i w_i)`, which is only semidefinite since the
//! weight vanishes where `u` does. Both pairs are computed by block inverse
//! iteration (`X ← S^{-1} D X`) with a Rayleigh–Ritz step in the `D` inner
//! product; `S` is never shifted and `D` is never inverted. The second pair is
//! found on the subspace `D`-orthogonal to `v1`, so `L_u(v2) = 0` holds by
//! construction.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{Field, GridId, GridMode, SchrodingerOperator};
use crate::error::{Error, Result};
use crate::functionals::{weighted_inner_raw, WeightField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Relative change of μ between sweeps regarded as converged.
    pub tol: f64,
    /// Number of consecutive sweeps that must meet `tol`.
    pub stable_sweeps: usize,
    /// Relative eigen-residual `‖A v - μ w v‖ / (μ ‖w v‖)` required on exit.
    pub residual_tol: f64,
    pub max_iter: usize,
    pub block_size: usize,
    /// Seed of the random start vectors.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-13,
            stable_sweeps: 3,
            residual_tol: 1e-8,
            max_iter: 10_000,
            block_size: 4,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub mu: f64,
    pub v: Field,
    /// `K_u(v)`, equal to one.
    pub k_norm: f64,
    /// `‖A v - μ w v‖₂`
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenpairSummary {
    pub mu: f64,
    pub residual: f64,
    pub k_norm: f64,
}

impl Eigenpair {
    pub fn summary(&self) -> EigenpairSummary {
        EigenpairSummary {
            mu: self.mu,
            residual: self.residual,
            k_norm: self.k_norm,
        }
    }
}

/// Start block carried between solves of nearby problems.
#[derive(Debug, Clone, Default)]
pub struct EigenWorkspace {
    grid: Option<GridId>,
    block: Vec<Vec<f64>>,
}

impl EigenWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn take_block(&mut self, grid: GridId) -> Option<Vec<Vec<f64>>> {
        if self.grid == Some(grid) && !self.block.is_empty() {
            Some(std::mem::take(&mut self.block))
        } else {
            None
        }
    }

    fn store(&mut self, grid: GridId, block: Vec<Vec<f64>>) {
        self.grid = Some(grid);
        self.block = block;
    }
}

/// Principal pair `(μ1(u), v1(u))` with `v1 > 0` and `K_u(v1) = 1`.
pub fn principal_eigenpair(
    op: &SchrodingerOperator,
    weight: &WeightField,
    opts: &EigenOptions,
) -> Result<Eigenpair> {
    principal_eigenpair_with(op, weight, opts, &mut EigenWorkspace::new())
}

pub fn principal_eigenpair_with(
    op: &SchrodingerOperator,
    weight: &WeightField,
    opts: &EigenOptions,
    ws: &mut EigenWorkspace,
) -> Result<Eigenpair> {
    let grid = op.grid();
    grid.check(weight.grid_id())?;
    if weight.support_size() == 0 {
        return Err(Error::Degenerate("weight vanishes identically".into()));
    }
    let d = weight.mass_matrix(grid);
    let mut solver = Subspace::new(op, &d, None, opts, ws.take_block(grid.id()))?;
    let iterations = solver.run(opts, "principal eigenpair")?;
    let mut v = solver.block[0].clone();

    // Fix the sign by the integral, then polish with one inverse-iteration
    // step: S^{-1} is positive, so a nonnegative iterate becomes strictly positive.
    let total: f64 = v.iter().zip(grid.weights()).map(|(a, b)| a * b).sum();
    if total < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(i) = v.iter().position(|&x| x < -1e-12 * vmax) {
        return Err(Error::Internal(format!(
            "principal eigenfunction changes sign at node {i} ({:e})",
            v[i]
        )));
    }
    let mut y: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a.max(0.0) * b).collect();
    op.solve_stiffness_in_place(&mut y);
    if let Some(i) = y.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Internal(format!(
            "principal eigenfunction is not strictly positive at node {i}"
        )));
    }
    let pair = finish_pair(op, weight, &d, y, iterations)?;
    ws.store(grid.id(), solver.block);
    Ok(pair)
}

/// Second pair `(μ2(u), v2(u))`: the lowest pair on `{v : L_u(v) = 0}`.
pub fn second_eigenpair(
    op: &SchrodingerOperator,
    weight: &WeightField,
    first: &Eigenpair,
    opts: &EigenOptions,
) -> Result<Eigenpair> {
    second_eigenpair_with(op, weight, first, opts, &mut EigenWorkspace::new())
}

pub fn second_eigenpair_with(
    op: &SchrodingerOperator,
    weight: &WeightField,
    first: &Eigenpair,
    opts: &EigenOptions,
    ws: &mut EigenWorkspace,
) -> Result<Eigenpair> {
    let grid = op.grid();
    grid.check(weight.grid_id())?;
    grid.check_field(&first.v)?;
    if weight.support_size() < 2 {
        return Err(Error::SpectralDeficiency(format!(
            "weight is supported on {} node(s); no second eigenvalue",
            weight.support_size()
        )));
    }
    let d = weight.mass_matrix(grid);
    let v1 = first.v.values().to_vec();
    let mut solver = Subspace::new(op, &d, Some(&v1), opts, ws.take_block(grid.id()))?;
    let iterations = solver.run(opts, "second eigenpair")?;
    let mut v = solver.block[0].clone();
    deflate(&mut v, &v1, &d);
    let pair = finish_pair(op, weight, &d, v, iterations)?;
    ws.store(grid.id(), solver.block);
    Ok(pair)
}

fn finish_pair(
    op: &SchrodingerOperator,
    weight: &WeightField,
    d: &[f64],
    mut v: Vec<f64>,
    iterations: usize,
) -> Result<Eigenpair> {
    let grid = op.grid();
    let k: f64 = v.iter().zip(d).map(|(a, b)| a * a * b).sum();
    if !(k > 0.0) {
        return Err(Error::Internal("eigenvector has zero weighted norm".into()));
    }
    let s = k.sqrt();
    v.iter_mut().for_each(|x| *x /= s);
    let sv = op.stiffness_vec(&v);
    let mu: f64 = v.iter().zip(&sv).map(|(a, b)| a * b).sum();
    let cell = grid.weights();
    // ‖A v - μ w v‖² = Σ (S v - μ D v)_i² / cell_i
    let residual = sv
        .iter()
        .zip(&v)
        .zip(d.iter().zip(cell))
        .map(|((s, x), (dd, c))| {
            let r = s - mu * dd * x;
            r * r / c
        })
        .sum::<f64>()
        .sqrt();
    let k_norm = weighted_inner_raw(cell, weight.values(), &v, &v);
    Ok(Eigenpair {
        mu,
        v: Field::from_raw(grid.id(), v),
        k_norm,
        residual,
        iterations,
    })
}

/// `x ← x - v1 (v1ᵀ D x)` for a `D`-normalized `v1`.
fn deflate(x: &mut [f64], v1: &[f64], d: &[f64]) {
    let c: f64 = v1
        .iter()
        .zip(d)
        .zip(x.iter())
        .map(|((a, b), c)| a * b * c)
        .sum();
    x.iter_mut().zip(v1).for_each(|(xi, a)| *xi -= c * a);
}

/// Relative eigen-residual `‖A v - μ w v‖ / (μ ‖w v‖)` of a `D`-normalized vector.
fn relative_residual(op: &SchrodingerOperator, d: &[f64], v: &[f64], mu: f64) -> f64 {
    let cell = op.grid().weights();
    let sv = op.stiffness_vec(v);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..v.len() {
        let dv = d[i] * v[i];
        let r = sv[i] - mu * dv;
        num += r * r / cell[i];
        den += dv * dv / cell[i];
    }
    (num / den).sqrt() / mu
}

/// Block inverse iteration with Rayleigh–Ritz, optionally deflated against `v1`.
struct Subspace<'a> {
    op: &'a SchrodingerOperator,
    d: &'a [f64],
    deflation: Option<&'a [f64]>,
    block: Vec<Vec<f64>>,
    ritz: Vec<f64>,
}

impl<'a> Subspace<'a> {
    fn new(
        op: &'a SchrodingerOperator,
        d: &'a [f64],
        deflation: Option<&'a [f64]>,
        opts: &EigenOptions,
        warm: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let support = d.iter().filter(|&&x| x > 0.0).count();
        let reserved = usize::from(deflation.is_some());
        let size = opts
            .block_size
            .max(1)
            .min(support.saturating_sub(reserved).max(1));
        let n = d.len();
        let block = match warm {
            Some(b) if b.len() == size && b.iter().all(|c| c.len() == n) => b,
            _ => start_block(op, size, opts.seed),
        };
        Ok(Subspace {
            op,
            d,
            deflation,
            block,
            ritz: Vec::new(),
        })
    }

    /// One sweep: apply `S^{-1} D`, then Rayleigh–Ritz. Returns Ritz values.
    fn sweep(&mut self) -> Result<()> {
        let mut next = Vec::with_capacity(self.block.len());
        for x in &self.block {
            let mut y = x.clone();
            if let Some(v1) = self.deflation {
                deflate(&mut y, v1, self.d);
            }
            for (yi, di) in y.iter_mut().zip(self.d) {
                *yi *= di;
            }
            self.op.solve_stiffness_in_place(&mut y);
            if let Some(v1) = self.deflation {
                deflate(&mut y, v1, self.d);
            }
            next.push(y);
        }
        let basis = d_orthonormalize(next, self.d, self.deflation);
        if basis.is_empty() {
            return Err(Error::SpectralDeficiency(
                "iteration subspace collapsed on the weight support".into(),
            ));
        }
        let m = basis.len();
        let s_basis: Vec<Vec<f64>> = basis.iter().map(|b| self.op.stiffness_vec(b)).collect();
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let g: f64 = basis[i].iter().zip(&s_basis[j]).map(|(a, b)| a * b).sum();
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let n = self.d.len();
        let mut block = Vec::with_capacity(m);
        let mut ritz = Vec::with_capacity(m);
        for &k in &order {
            let mut x = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(j, k)];
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
            }
            block.push(x);
            ritz.push(eig.eigenvalues[k]);
        }
        // keep the block size if the basis lost a direction
        while block.len() < self.block.len() {
            block.push(self.block[block.len()].clone());
        }
        self.block = block;
        self.ritz = ritz;
        Ok(())
    }

    fn run(&mut self, opts: &EigenOptions, what: &'static str) -> Result<usize> {
        let mut previous = f64::INFINITY;
        let mut stable = 0;
        let mut last_residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            self.sweep()?;
            let mu = self.ritz[0];
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(Error::Internal(format!(
                    "{what}: non-positive Ritz value {mu}"
                )));
            }
            let change = (previous - mu).abs() / mu;
            previous = mu;
            stable = if change <= opts.tol { stable + 1 } else { 0 };
            if stable >= opts.stable_sweeps {
                let mut v = self.block[0].clone();
                if let Some(v1) = self.deflation {
                    deflate(&mut v, v1, self.d);
                }
                last_residual = relative_residual(self.op, self.d, &v, mu);
                if last_residual <= opts.residual_tol {
                    return Ok(it);
                }
            }
        }
        Err(Error::NotConverged {
            solver: what,
            iterations: opts.max_iter,
            residual: last_residual,
        })
    }
}

/// Modified Gram–Schmidt in the `D` inner product, twice, dropping
/// directions that are numerically dependent.
fn d_orthonormalize(vectors: Vec<Vec<f64>>, d: &[f64], deflation: Option<&[f64]>) -> Vec<Vec<f64>> {
    let dnorm = |x: &[f64]| x.iter().zip(d).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for mut x in vectors {
        let original = dnorm(&x);
        if !(original > 0.0) {
            continue;
        }
        for _ in 0..2 {
            if let Some(v1) = deflation {
                deflate(&mut x, v1, d);
            }
            for b in &basis {
                let c: f64 = b.iter().zip(d).zip(&x).map(|((a, w), y)| a * w * y).sum();
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
            }
        }
        let norm = dnorm(&x);
        if norm > 1e-10 * original {
            x.iter_mut().for_each(|xi| *xi /= norm);
            basis.push(x);
        }
    }
    basis
}

/// Deterministic start block: low-order polynomials in the coordinates
/// followed by seeded random vectors. It does not depend on the weight, so
/// `u` and `-u` produce bit-identical iterations.
fn start_block(op: &SchrodingerOperator, size: usize, seed: u64) -> Vec<Vec<f64>> {
    let grid = op.grid();
    let scale = grid.half_width();
    let mut polys: Vec<Box<dyn Fn(f64, f64) -> f64>> =
        vec![Box::new(|_, _| 1.0), Box::new(|x, _| x)];
    if grid.mode() == GridMode::Cartesian2d {
        polys.push(Box::new(|_, y| y));
        polys.push(Box::new(|x, y| x * y));
    } else {
        polys.push(Box::new(|x, _| x * x));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|k| {
            let random: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            grid.nodes()
                .zip(random)
                .map(|(n, r)| {
                    let (x, y) = (n.coords[0] / scale, n.coords[1] / scale);
                    match polys.get(k) {
                        Some(f) => f(x, y) + 1e-3 * r,
                        None => r,
                    }
                })
                .collect()
        })
        .collect()
}
