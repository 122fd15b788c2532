//! Potentials `V = V∞ - W` and the standing hypotheses on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::discretization::{integrate, Field, Grid};
use crate::error::{Error, Result};

/// Name under which the norm/power convention is recorded in reports.
pub const EXPONENT_CONVENTION: &str = "adopted-exponent-convention";

/// Relative tolerance of the discrete limit-at-infinity check.
pub const LIMIT_TOLERANCE: f64 = 0.01;
/// Fraction of the half width that forms the outer annulus.
pub const LIMIT_ANNULUS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: f64,
    pub dimension: u32,
    pub v_inf: f64,
}

impl ProblemParams {
    pub fn new(p: f64, dimension: u32, v_inf: f64) -> Result<Self> {
        let params = ProblemParams {
            p,
            dimension,
            v_inf,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 2.0) || !self.p.is_finite() {
            return Err(Error::Config(format!(
                "exponent p = {} must exceed 2",
                self.p
            )));
        }
        if let Some(crit) = critical_exponent(self.dimension) {
            if self.p >= crit {
                return Err(Error::Config(format!(
                    "exponent p = {} is not subcritical (2* = {crit}) in dimension {}",
                    self.p, self.dimension
                )));
            }
        }
        if !(self.v_inf > 0.0) || !self.v_inf.is_finite() {
            return Err(Error::Config(format!(
                "V_inf = {} must be positive",
                self.v_inf
            )));
        }
        Ok(())
    }

    /// Exponent q of the norm in which W must be small: the Hölder conjugate of p/2.
    pub fn norm_exponent(&self) -> f64 {
        self.p / (self.p - 2.0)
    }
}

/// `2N/(N-2)` for N >= 3, none (infinite) below.
pub fn critical_exponent(dimension: u32) -> Option<f64> {
    (dimension >= 3).then(|| 2.0 * dimension as f64 / (dimension as f64 - 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Constant {
        v_inf: f64,
    },
    /// `V(x) = V∞ - c0 exp(-a |x|)`
    ExpWell {
        v_inf: f64,
        c0: f64,
        a: f64,
    },
    /// Tabulated values with their limit at infinity.
    Table {
        v_inf: f64,
        values: Field,
    },
}

impl PotentialSpec {
    pub fn v_inf(&self) -> f64 {
        match self {
            PotentialSpec::Constant { v_inf }
            | PotentialSpec::ExpWell { v_inf, .. }
            | PotentialSpec::Table { v_inf, .. } => *v_inf,
        }
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self, PotentialSpec::Constant { .. })
    }

    /// The same problem at infinity: `V ≡ V∞`.
    pub fn at_infinity(&self) -> PotentialSpec {
        PotentialSpec::Constant {
            v_inf: self.v_inf(),
        }
    }

    fn validate(&self) -> Result<()> {
        let v_inf = self.v_inf();
        if !(v_inf > 0.0) || !v_inf.is_finite() {
            return Err(Error::Config(format!("V_inf = {v_inf} must be positive")));
        }
        if let PotentialSpec::ExpWell { c0, a, .. } = self {
            if !(*c0 > 0.0 && c0.is_finite()) {
                return Err(Error::Config(format!(
                    "well depth c0 = {c0} must be positive"
                )));
            }
            if !(*a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!(
                    "well decay a = {a} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Discrete checks of the nonnegativity and limit hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialChecks {
    pub min_value: f64,
    /// max |V - V∞| / V∞ over the outer annulus
    pub limit_deviation: f64,
    pub limit_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub field: Field,
    pub checks: PotentialChecks,
}

/// Evaluates the potential on the grid. A negative value anywhere violates
/// `V >= 0` and is an error; the limit check is recorded, not enforced.
pub fn make_potential(spec: &PotentialSpec, grid: &Grid) -> Result<Potential> {
    spec.validate()?;
    let field = match spec {
        PotentialSpec::Constant { v_inf } => Field::constant(grid, *v_inf),
        PotentialSpec::ExpWell { v_inf, c0, a } => {
            Field::from_fn(grid, |n| v_inf - c0 * (-a * n.radius).exp())
        }
        PotentialSpec::Table { values, .. } => {
            grid.check_field(values)?;
            values.clone()
        }
    };
    let checks = potential_checks(grid, &field, spec.v_inf());
    if checks.min_value < 0.0 {
        return Err(Error::Hypothesis {
            condition: "V(x) >= 0",
            detail: format!("potential reaches {} on the grid", checks.min_value),
        });
    }
    if !checks.limit_ok {
        log::warn!(
            "potential deviates from V_inf by {:.3e} (relative) near the boundary",
            checks.limit_deviation
        );
    }
    Ok(Potential { field, checks })
}

fn potential_checks(grid: &Grid, field: &Field, v_inf: f64) -> PotentialChecks {
    let min_value = field.values().iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = LIMIT_ANNULUS * grid.half_width();
    let limit_deviation = grid
        .nodes()
        .zip(field.values())
        .filter(|(n, _)| n.radius >= cutoff)
        .map(|(_, v)| (v - v_inf).abs() / v_inf)
        .fold(0.0, f64::max);
    PotentialChecks {
        min_value,
        limit_deviation,
        limit_ok: limit_deviation < LIMIT_TOLERANCE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Flat collection of hypothesis checks, keyed by check name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HypothesisReport {
    pub checks: BTreeMap<String, Check>,
}

impl HypothesisReport {
    fn push(&mut self, name: &str, value: f64, threshold: f64, pass: bool) {
        self.checks.insert(
            name.to_string(),
            Check {
                name: name.to_string(),
                value,
                threshold,
                pass,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.get(name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    /// Re-checks the decay condition `a < a0` against a fitted ground-state decay rate.
    pub fn with_fitted_decay_rate(mut self, well_rate: f64, fitted_rate: f64) -> Self {
        self.push(
            "decay_rate_a_posteriori",
            well_rate,
            fitted_rate,
            well_rate < fitted_rate,
        );
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `(2^{(p-2)/p} - 1) λ1∞`
pub fn smallness_threshold(p: f64, lambda1_inf: f64) -> f64 {
    (2f64.powf((p - 2.0) / p) - 1.0) * lambda1_inf
}

/// `‖W‖_q` by quadrature, with `W = V∞ - V`.
pub fn well_norm(grid: &Grid, potential: &Field, v_inf: f64, q: f64) -> Result<f64> {
    let wq = potential.map(|v| (v_inf - v).abs().powf(q));
    Ok(integrate(grid, &wq)?.powf(1.0 / q))
}

/// Evaluates the hypotheses of the nodal existence result. Failures are
/// reported, never raised.
pub fn hypothesis_report(
    spec: &PotentialSpec,
    params: &ProblemParams,
    grid: &Grid,
    lambda1_inf: f64,
) -> Result<HypothesisReport> {
    params.validate()?;
    if !(lambda1_inf > 0.0) {
        return Err(Error::Precondition(format!(
            "lambda1_inf = {lambda1_inf} must be positive"
        )));
    }
    let v_inf = spec.v_inf();
    let field = match spec {
        PotentialSpec::Constant { v_inf } => Field::constant(grid, *v_inf),
        PotentialSpec::ExpWell { v_inf, c0, a } => {
            Field::from_fn(grid, |n| v_inf - c0 * (-a * n.radius).exp())
        }
        PotentialSpec::Table { values, .. } => {
            grid.check_field(values)?;
            values.clone()
        }
    };
    let checks = potential_checks(grid, &field, v_inf);
    let q = params.norm_exponent();
    let mut report = HypothesisReport::default();
    report.push(EXPONENT_CONVENTION, q, (params.p - 2.0) / params.p, true);
    report.push(
        "nonnegativity",
        checks.min_value,
        0.0,
        checks.min_value >= 0.0,
    );
    report.push(
        "limit_at_infinity",
        checks.limit_deviation,
        LIMIT_TOLERANCE,
        checks.limit_ok,
    );

    let rate_cap = v_inf.sqrt();
    let (rate, lower_ok) = match spec {
        PotentialSpec::Constant { .. } => (0.0, false),
        PotentialSpec::ExpWell { c0, a, .. } => (*a, *c0 > 0.0 && *a < rate_cap),
        PotentialSpec::Table { .. } => {
            let well = field.map(|v| v_inf - v);
            match fit_well_rate(grid, &well) {
                Some(a) => {
                    let c0 = grid
                        .nodes()
                        .zip(well.values())
                        .map(|(n, w)| w * (a * n.radius).exp())
                        .fold(f64::INFINITY, f64::min);
                    (a, c0 > 0.0 && a < rate_cap)
                }
                None => (f64::NAN, false),
            }
        }
    };
    report.push("exponential_lower_bound", rate, rate_cap, lower_ok);

    let norm = well_norm(grid, &field, v_inf, q)?;
    let threshold = smallness_threshold(params.p, lambda1_inf);
    report.push("smallness", norm, threshold, norm < threshold);
    Ok(report)
}

/// Decay rate of a positive well from a log-linear fit on the middle annulus.
fn fit_well_rate(grid: &Grid, well: &Field) -> Option<f64> {
    if well.values().iter().any(|&w| w <= 0.0) {
        return None;
    }
    let (lo, hi) = (0.3 * grid.half_width(), 0.8 * grid.half_width());
    let pts: Vec<(f64, f64)> = grid
        .nodes()
        .zip(well.values())
        .filter(|(n, _)| n.radius >= lo && n.radius <= hi)
        .map(|(n, w)| (n.radius, w.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((-sxy / sxx).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::GridMode;

    fn grid1d() -> Grid {
        Grid::new(GridMode::Cartesian1d, 15.0, 0.005).unwrap()
    }

    #[test]
    fn constant_potential() {
        let g = grid1d();
        let pot = make_potential(&PotentialSpec::Constant { v_inf: 1.0 }, &g).unwrap();
        assert!(pot.field.values().iter().all(|&v| v == 1.0));
        assert!(pot.checks.limit_ok);
    }

    #[test]
    fn exp_well_value_at_origin() {
        let g = grid1d();
        let spec = PotentialSpec::ExpWell {
            v_inf: 1.0,
            c0: 0.3,
            a: 0.5,
        };
        let pot = make_potential(&spec, &g).unwrap();
        let mid = g.len() / 2;
        assert_eq!(g.node(mid).radius, 0.0);
        assert!((pot.field.values()[mid] - 0.7).abs() < 1e-15);
        assert!(pot.checks.limit_ok);
    }

    #[test]
    fn too_deep_well_violates_nonnegativity() {
        let g = grid1d();
        let spec = PotentialSpec::ExpWell {
            v_inf: 1.0,
            c0: 1.5,
            a: 0.5,
        };
        match make_potential(&spec, &g) {
            Err(Error::Hypothesis { condition, .. }) => assert_eq!(condition, "V(x) >= 0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exponent_window() {
        assert!(ProblemParams::new(4.0, 1, 1.0).is_ok());
        assert!(ProblemParams::new(2.0, 1, 1.0).is_err());
        assert!(ProblemParams::new(6.0, 3, 1.0).is_err());
        assert!(ProblemParams::new(5.9, 3, 1.0).is_ok());
        assert!(ProblemParams::new(40.0, 2, 1.0).is_ok());
        assert!(ProblemParams::new(4.0, 2, 0.0).is_err());
    }

    #[test]
    fn threshold_multiplier_for_quartic() {
        let t = smallness_threshold(4.0, 1.0);
        assert!((t - 0.41421356237309515).abs() < 1e-15);
    }

    #[test]
    fn autonomous_report() {
        let g = grid1d();
        let spec = PotentialSpec::Constant { v_inf: 1.0 };
        let params = ProblemParams::new(4.0, 1, 1.0).unwrap();
        let rep = hypothesis_report(&spec, &params, &g, 2.3094).unwrap();
        assert_eq!(rep.get("smallness").unwrap().value, 0.0);
        assert!(rep.get("smallness").unwrap().pass);
        assert!(!rep.get("exponential_lower_bound").unwrap().pass);
        assert!(rep.get(EXPONENT_CONVENTION).is_some());
    }

    #[test]
    fn exp_well_norm_in_one_dimension() {
        // ∫ c0² e^{-2a|x|} dx = c0²/a on the line
        let g = grid1d();
        let spec = PotentialSpec::ExpWell {
            v_inf: 1.0,
            c0: 0.3,
            a: 0.5,
        };
        let params = ProblemParams::new(4.0, 1, 1.0).unwrap();
        let rep = hypothesis_report(&spec, &params, &g, 2.3094).unwrap();
        let smallness = rep.get("smallness").unwrap();
        let expected = (0.09f64 / 0.5).sqrt();
        assert!(
            (smallness.value - expected).abs() < 1e-4 * expected,
            "{}",
            smallness.value
        );
        assert!(smallness.pass);
        assert!(rep.get("exponential_lower_bound").unwrap().pass);
        assert!(rep.all_pass());
    }

    #[test]
    fn report_serializes_flat() {
        let g = grid1d();
        let spec = PotentialSpec::ExpWell {
            v_inf: 1.0,
            c0: 0.3,
            a: 0.5,
        };
        let params = ProblemParams::new(4.0, 1, 1.0).unwrap();
        let rep = hypothesis_report(&spec, &params, &g, 2.3094).unwrap();
        let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        let smallness = &json["smallness"];
        assert_eq!(smallness["name"], "smallness");
        assert!(smallness["threshold"].as_f64().unwrap() > 0.0);
        assert_eq!(smallness["pass"], true);
    }

    #[test]
    fn table_potential_rate_is_recovered() {
        let g = grid1d();
        let values = Field::from_fn(&g, |n| 1.0 - 0.2 * (-0.4 * n.radius).exp());
        let spec = PotentialSpec::Table { v_inf: 1.0, values };
        let params = ProblemParams::new(4.0, 1, 1.0).unwrap();
        let rep = hypothesis_report(&spec, &params, &g, 2.3094).unwrap();
        let lower = rep.get("exponential_lower_bound").unwrap();
        assert!((lower.value - 0.4).abs() < 1e-6);
        assert!(lower.pass);
    }
}
