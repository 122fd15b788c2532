//! The variational quantities `J`, `I`, their gradients, the weight
//! `|u|^{p-2}` and the weighted forms built on it, and the Jacobi identity.

use std::hash::{Hash, Hasher};

use crate::discretization::{Field, Grid, GridId, SchrodingerOperator};
use crate::error::{Error, Result};

/// Magnitudes below this are treated as exact zeros when forming weights.
const WEIGHT_UNDERFLOW: f64 = 1e-300;

/// `J(u) = ∫ |∇u|² + V u²`, evaluated as `integrate(u A u)`.
pub fn energy(op: &SchrodingerOperator, u: &Field) -> Result<f64> {
    op.energy_form(u, u)
}

/// `I(u) = ∫ |u|^p`.
pub fn mass(grid: &Grid, u: &Field, p: f64) -> Result<f64> {
    grid.check_field(u)?;
    Ok(mass_raw(grid.weights(), u.values(), p))
}

pub(crate) fn mass_raw(w: &[f64], u: &[f64], p: f64) -> f64 {
    w.iter().zip(u).map(|(w, u)| w * abs_pow(*u, p)).sum()
}

/// `J'(u) = 2 A u`.
pub fn energy_gradient(op: &SchrodingerOperator, u: &Field) -> Result<Field> {
    Ok(op.apply(u)?.scaled(2.0))
}

/// `I'(u) = p |u|^{p-2} u`.
pub fn mass_gradient(grid: &Grid, u: &Field, p: f64) -> Result<Field> {
    grid.check_field(u)?;
    Ok(u.map(|x| p * abs_pow(x, p - 2.0) * x))
}

/// Radial projection `u / I(u)^{1/p}` onto `M = {I = 1}`.
pub fn normalize_to_manifold(grid: &Grid, u: &Field, p: f64) -> Result<Field> {
    let i = mass(grid, u, p)?;
    if !(i > 0.0) || !i.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot normalize a field with I(u) = {i}"
        )));
    }
    let scale = i.powf(-1.0 / p);
    Ok(u.scaled(scale))
}

/// `|x|^e`, exact for small integer exponents; zero below the underflow guard.
pub(crate) fn abs_pow(x: f64, e: f64) -> f64 {
    let a = x.abs();
    if a < WEIGHT_UNDERFLOW {
        return if e == 0.0 { 1.0 } else { 0.0 };
    }
    if e.fract() == 0.0 && e.abs() <= 16.0 {
        a.powi(e as i32)
    } else {
        ((e) * a.ln()).exp()
    }
}

/// The weight `|u|^{p-2}` of the linearized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    grid: GridId,
    values: Vec<f64>,
    source_checksum: u64,
}

impl WeightField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_id(&self) -> GridId {
        self.grid
    }

    /// Hash of `|u|`; equal for `u` and `-u`.
    pub fn source_checksum(&self) -> u64 {
        self.source_checksum
    }

    pub fn as_field(&self) -> Field {
        Field::from_raw(self.grid, self.values.clone())
    }

    /// Number of nodes carrying positive weight.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&w| w > 0.0).count()
    }

    /// The weight `w_i` times the cell measure, the diagonal of the discrete `K_u` form.
    pub(crate) fn mass_matrix(&self, grid: &Grid) -> Vec<f64> {
        self.values
            .iter()
            .zip(grid.weights())
            .map(|(a, b)| a * b)
            .collect()
    }
}

/// `|u|^{p-2}`, nodewise.
pub fn weight_of(grid: &Grid, u: &Field, p: f64) -> Result<WeightField> {
    grid.check_field(u)?;
    if !(p > 2.0) {
        return Err(Error::Config(format!("exponent p = {p} must exceed 2")));
    }
    let values: Vec<f64> = u.values().iter().map(|&x| abs_pow(x, p - 2.0)).collect();
    if values.iter().all(|&w| w == 0.0) {
        return Err(Error::Degenerate("weight of the zero field".into()));
    }
    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    for x in u.values() {
        x.abs().to_bits().hash(&mut hasher);
    }
    Ok(WeightField {
        grid: grid.id(),
        values,
        source_checksum: hasher.finish(),
    })
}

/// `∫ w f g`. With `w = |u|^{p-2}` this is `K_u(v)` for `f = g = v`,
/// `L_u(v)` for `f = v1(u)`, `g = v`, and `h(u)` for `f = u`, `g = v1(u)`.
pub fn weighted_inner(grid: &Grid, w: &WeightField, f: &Field, g: &Field) -> Result<f64> {
    grid.check(w.grid)?;
    grid.check_field(f)?;
    grid.check_field(g)?;
    Ok(weighted_inner_raw(
        grid.weights(),
        &w.values,
        f.values(),
        g.values(),
    ))
}

pub(crate) fn weighted_inner_raw(cell: &[f64], w: &[f64], f: &[f64], g: &[f64]) -> f64 {
    cell.iter()
        .zip(w)
        .zip(f.iter().zip(g))
        .map(|((c, w), (a, b))| c * w * a * b)
        .sum()
}

/// Both sides of the discrete Jacobi identity
/// `J(v) - μ1 K_u(v) = ∫ v1² |∇(v / v1)|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiCheck {
    pub lhs: f64,
    /// edge sum over edges whose endpoints both satisfy `v1 >= floor`
    pub rhs: f64,
    pub residual: f64,
    /// share of nodes excluded by the floor
    pub excluded_fraction: f64,
}

/// Evaluates the Jacobi identity for a principal pair `(mu1, v1)` of the weight `w`.
pub fn jacobi_residual(
    op: &SchrodingerOperator,
    w: &WeightField,
    mu1: f64,
    v1: &Field,
    v: &Field,
    floor: f64,
) -> Result<JacobiCheck> {
    let grid = op.grid();
    grid.check(w.grid)?;
    grid.check_field(v1)?;
    grid.check_field(v)?;
    if !(floor > 0.0) {
        return Err(Error::Precondition(format!(
            "floor must be positive, got {floor}"
        )));
    }
    if let Some(i) = v1.values().iter().position(|&x| x <= 0.0) {
        return Err(Error::Precondition(format!(
            "principal eigenfunction is not positive at node {i}"
        )));
    }
    let lhs = energy(op, v)? - mu1 * weighted_inner(grid, w, v, v)?;
    let a = v1.values();
    let b = v.values();
    let mut rhs = 0.0;
    op.for_each_edge(|i, j, c| {
        if a[i] >= floor && a[j] >= floor {
            let d = b[i] / a[i] - b[j] / a[j];
            rhs += c * a[i] * a[j] * d * d;
        }
    });
    let excluded = a.iter().filter(|&&x| x < floor).count();
    Ok(JacobiCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        excluded_fraction: excluded as f64 / a.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{integrate, GridMode};

    fn sech_setup() -> (Grid, SchrodingerOperator, Field) {
        let g = Grid::new(GridMode::Cartesian1d, 15.0, 0.005).unwrap();
        let op = SchrodingerOperator::new(&g, &Field::constant(&g, 1.0)).unwrap();
        let u = Field::from_fn(&g, |n| 2f64.sqrt() / n.coords[0].cosh());
        (g, op, u)
    }

    #[test]
    fn soliton_energy_and_mass() {
        let (g, op, u) = sech_setup();
        let j = energy(&op, &u).unwrap();
        assert!((j - 16.0 / 3.0).abs() < 1e-4 * 16.0 / 3.0, "{j}");
        let i = mass(&g, &u, 4.0).unwrap();
        assert!((i - 16.0 / 3.0).abs() < 1e-4, "{i}");
        assert_eq!(mass(&g, &-&u, 4.0).unwrap(), i);
        let j2 = energy(&op, &u.scaled(2.0)).unwrap();
        assert!((j2 - 4.0 * j).abs() <= 1e-12 * j2);
        assert_eq!(energy(&op, &Field::zeros(&g)).unwrap(), 0.0);
        assert_eq!(mass(&g, &Field::zeros(&g), 4.0).unwrap(), 0.0);
    }

    #[test]
    fn normalization() {
        let (g, op, u) = sech_setup();
        let n = normalize_to_manifold(&g, &u, 4.0).unwrap();
        assert!((mass(&g, &n, 4.0).unwrap() - 1.0).abs() < 1e-12);
        let j = energy(&op, &n).unwrap();
        assert!((j - 4.0 / 3f64.sqrt()).abs() < 1e-4 * j, "{j}");
        let again = normalize_to_manifold(&g, &n, 4.0).unwrap();
        for (a, b) in again.values().iter().zip(n.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-300);
        }
        assert_eq!(normalize_to_manifold(&g, &-&u, 4.0).unwrap(), -n);
        assert!(matches!(
            normalize_to_manifold(&g, &Field::zeros(&g), 4.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn weights() {
        let (g, _, _) = sech_setup();
        let u = Field::from_fn(&g, |n| 1.0 / n.coords[0].cosh());
        let w = weight_of(&g, &u, 4.0).unwrap();
        for (wi, ui) in w.values().iter().zip(u.values()) {
            assert_eq!(*wi, ui * ui);
        }
        assert_eq!(weight_of(&g, &-&u, 4.0).unwrap(), w);
        let mut vals = vec![0.5; g.len()];
        vals[10] = -2.0;
        let w3 = weight_of(&g, &Field::from_values(&g, vals).unwrap(), 3.0).unwrap();
        assert_eq!(w3.values()[10], 2.0);
        assert!(weight_of(&g, &Field::zeros(&g), 4.0).is_err());

        let k = weighted_inner(&g, &w, &u, &u).unwrap();
        assert!((k - 4.0 / 3.0).abs() < 1e-5);
        assert_eq!(weighted_inner(&g, &w, &Field::zeros(&g), &u).unwrap(), 0.0);
    }

    #[test]
    fn k_of_u_is_mass_on_manifold() {
        let (g, _, u) = sech_setup();
        let u = normalize_to_manifold(&g, &u.map(|x| x * (1.0 + 0.3 * x)), 3.5).unwrap();
        let w = weight_of(&g, &u, 3.5).unwrap();
        let k = weighted_inner(&g, &w, &u, &u).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_integer_weights_use_log_form() {
        let (g, _, _) = sech_setup();
        let u = Field::from_fn(&g, |n| n.coords[0].sin());
        let w = weight_of(&g, &u, 3.3).unwrap();
        for (wi, ui) in w.values().iter().zip(u.values()) {
            let expect = ui.abs().powf(1.3);
            assert!((wi - expect).abs() <= 1e-14 * expect.max(1e-300));
        }
        let tiny = Field::constant(&g, 1e-310);
        assert!(weight_of(&g, &tiny, 3.3).is_err());
    }

    #[test]
    fn gradient_of_quadratic_form() {
        let (g, op, u) = sech_setup();
        let w = Field::from_fn(&g, |n| (-(n.coords[0] - 1.0).powi(2)).exp());
        let grad = energy_gradient(&op, &u).unwrap();
        let lhs = integrate(&g, &grad.zip_map(&w, |a, b| a * b).unwrap()).unwrap();
        let t = 1e-5;
        let jp = energy(&op, &u.add_scaled(t, &w).unwrap()).unwrap();
        let jm = energy(&op, &u.add_scaled(-t, &w).unwrap()).unwrap();
        let fd = (jp - jm) / (2.0 * t);
        assert!((lhs - fd).abs() <= 1e-6 * lhs.abs());
        assert_eq!(energy_gradient(&op, &-&u).unwrap(), -grad);
    }
}
