//! Post-hoc certification of computed states.

use serde::{Deserialize, Serialize};

use crate::discretization::{norm_l2, Field, Grid, GridMode, SchrodingerOperator};
use crate::error::{Error, Result};
use crate::functionals::{abs_pow, mass};

/// Default nodality threshold, relative to the total mass `I(u)`.
pub const DEFAULT_NODAL_DELTA: f64 = 1e-3;
/// Fit annulus as fractions of the half width.
pub const FIT_ANNULUS: (f64, f64) = (0.3, 0.8);

/// `‖A u - λ |u|^{p-2} u‖₂ / max(1, ‖u‖₂)`
pub fn residual_eq(op: &SchrodingerOperator, u: &Field, lambda: f64, p: f64) -> Result<f64> {
    let grid = op.grid();
    let au = op.apply(u)?;
    let r = au.zip_map(u, |a, x| a - lambda * abs_pow(x, p - 2.0) * x)?;
    Ok(norm_l2(grid, &r)? / norm_l2(grid, u)?.max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalityReport {
    /// `∫ (u⁺)^p`
    pub pos_mass: f64,
    /// `∫ (u⁻)^p`
    pub neg_mass: f64,
    pub is_nodal: bool,
    /// absolute threshold applied to both signed masses
    pub threshold: f64,
}

/// Signed masses of `u`; nodal when both reach `delta · I(u)`.
pub fn nodality(grid: &Grid, u: &Field, p: f64, delta: f64) -> Result<NodalityReport> {
    let pos_mass = mass(grid, &u.positive_part(), p)?;
    let neg_mass = mass(grid, &u.negative_part(), p)?;
    let threshold = delta * (pos_mass + neg_mass);
    Ok(NodalityReport {
        pos_mass,
        neg_mass,
        is_nodal: pos_mass.min(neg_mass) >= threshold && threshold > 0.0,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub fitted_rate: f64,
    pub fitted_c0: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_squared: f64,
    /// `sqrt(V∞)`, the rate predicted for the problem at infinity.
    pub expected_rate: f64,
    pub samples: usize,
    /// Fit scatter: `(|x|, log(u |x|^{(N-1)/2}))`.
    #[serde(skip)]
    pub scatter: Vec<(f64, f64)>,
}

impl DecayFit {
    pub fn relative_error(&self) -> f64 {
        (self.fitted_rate - self.expected_rate).abs() / self.expected_rate
    }

    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("r,log_profile\n");
        for (r, y) in &self.scatter {
            out.push_str(&format!("{r},{y}\n"));
        }
        out
    }
}

/// Least-squares fit of `log(u |x|^{(N-1)/2}) ≈ log C0 - rate |x|` over the
/// annulus `0.3 R <= |x| <= 0.8 R`.
pub fn decay_fit(grid: &Grid, u: &Field, v_inf: f64, dimension: u32) -> Result<DecayFit> {
    grid.check_field(u)?;
    let r_min = FIT_ANNULUS.0 * grid.half_width();
    let r_max = FIT_ANNULUS.1 * grid.half_width();
    let power = (dimension as f64 - 1.0) / 2.0;
    let mut scatter = Vec::new();
    for (node, &value) in grid.nodes().zip(u.values()) {
        if node.radius < r_min || node.radius > r_max {
            continue;
        }
        if !(value > 0.0) {
            return Err(Error::Precondition(format!(
                "field is not positive on the fit annulus (u = {value:e} at |x| = {})",
                node.radius
            )));
        }
        scatter.push((node.radius, (value * node.radius.powf(power)).ln()));
    }
    if scatter.len() < 3 {
        return Err(Error::Precondition(
            "fit annulus holds fewer than 3 nodes".into(),
        ));
    }
    let m = scatter.len() as f64;
    let mx = scatter.iter().map(|s| s.0).sum::<f64>() / m;
    let my = scatter.iter().map(|s| s.1).sum::<f64>() / m;
    let sxx: f64 = scatter.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = scatter.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let syy: f64 = scatter.iter().map(|s| (s.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(DecayFit {
        fitted_rate: -slope,
        fitted_c0: intercept.exp(),
        r_min,
        r_max,
        r_squared,
        expected_rate: v_inf.sqrt(),
        samples: scatter.len(),
        scatter,
    })
}

/// `‖u - ū‖₂ / ‖u‖₂` where `ū` is the angular average of `u`: bin means over
/// radius shells of width `2h`, interpolated linearly in the radius. Shells
/// holding fewer than four nodes are left out of both norms.
pub fn radial_deviation(grid: &Grid, u: &Field) -> Result<f64> {
    grid.check_field(u)?;
    if grid.mode() != GridMode::Cartesian2d {
        return Err(Error::Precondition(format!(
            "radial deviation needs a cartesian2d grid, got {}",
            grid.mode()
        )));
    }
    let width = 2.0 * grid.spacing();
    let nbins = (grid.half_width() * 2f64.sqrt() / width).ceil() as usize + 1;
    let mut count = vec![0usize; nbins];
    let mut sum_r = vec![0.0; nbins];
    let mut sum_u = vec![0.0; nbins];
    let bin_of = |r: f64| ((r / width) as usize).min(nbins - 1);
    for (node, &value) in grid.nodes().zip(u.values()) {
        let b = bin_of(node.radius);
        count[b] += 1;
        sum_r[b] += node.radius;
        sum_u[b] += value;
    }
    let kept: Vec<(f64, f64)> = (0..nbins)
        .filter(|&b| count[b] >= 4)
        .map(|b| (sum_r[b] / count[b] as f64, sum_u[b] / count[b] as f64))
        .collect();
    if kept.is_empty() {
        return Err(Error::Precondition(
            "no radius shell holds four nodes".into(),
        ));
    }
    let average = |r: f64| -> f64 {
        let k = kept.partition_point(|&(rb, _)| rb < r);
        if k == 0 {
            kept[0].1
        } else if k == kept.len() {
            kept[k - 1].1
        } else {
            let (r0, u0) = kept[k - 1];
            let (r1, u1) = kept[k];
            u0 + (u1 - u0) * (r - r0) / (r1 - r0)
        }
    };
    let mut dev = 0.0;
    let mut norm = 0.0;
    for ((node, &value), &w) in grid.nodes().zip(u.values()).zip(grid.weights()) {
        if count[bin_of(node.radius)] < 4 {
            continue;
        }
        let d = value - average(node.radius);
        dev += w * d * d;
        norm += w * value * value;
    }
    if !(norm > 0.0) {
        return Err(Error::Degenerate(
            "field vanishes on the kept shells".into(),
        ));
    }
    Ok((dev / norm).sqrt())
}
