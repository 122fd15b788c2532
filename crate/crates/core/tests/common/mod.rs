#![allow(dead_code)]

use nodal_core::model::PotentialSpec;
use nodal_core::{Field, Grid, GridMode, Problem};
use proptest::prelude::*;

pub const WELL: PotentialSpec = PotentialSpec::ExpWell {
    v_inf: 1.0,
    c0: 0.3,
    a: 0.5,
};
pub const FLAT: PotentialSpec = PotentialSpec::Constant { v_inf: 1.0 };

pub fn problem(spec: &PotentialSpec, mode: GridMode, r: f64, h: f64, p: f64) -> Problem {
    let grid = Grid::new(mode, r, h).expect("grid");
    Problem::from_spec(&grid, spec, p).expect("problem")
}

/// Gaussian bump: amplitude, centre (x, y), width.
pub type Bump = (f64, f64, f64, f64);

pub fn bumps(max: usize, spread: f64) -> impl Strategy<Value = Vec<Bump>> {
    prop::collection::vec(
        (
            0.2f64..2.0,
            -spread..spread,
            -spread..spread,
            0.6f64..2.5,
            any::<bool>(),
        )
            .prop_map(|(a, x, y, w, neg)| (if neg { -a } else { a }, x, y, w)),
        1..=max,
    )
}

/// Like `bumps`, but the first bump is positive and the second negative.
pub fn signed_bumps(max: usize, spread: f64) -> impl Strategy<Value = Vec<Bump>> {
    bumps(max.max(2), spread)
        .prop_filter("two bumps", |b| b.len() >= 2)
        .prop_map(|mut b| {
            b[0].0 = b[0].0.abs();
            b[1].0 = -b[1].0.abs();
            b
        })
}

pub fn field_of(grid: &Grid, bumps: &[Bump]) -> Field {
    let planar = grid.mode() == GridMode::Cartesian2d;
    let radial = matches!(grid.mode(), GridMode::Radial { .. });
    Field::from_fn(grid, |n| {
        bumps
            .iter()
            .map(|&(amp, cx, cy, width)| {
                let d2 = if radial {
                    (n.radius - cx.abs()).powi(2)
                } else if planar {
                    (n.coords[0] - cx).powi(2) + (n.coords[1] - cy).powi(2)
                } else {
                    (n.coords[0] - cx).powi(2)
                };
                amp * (-d2 / (width * width)).exp()
            })
            .sum()
    })
}

pub fn rel_l2(grid: &Grid, a: &Field, b: &Field) -> f64 {
    use nodal_core::discretization::norm_l2;
    norm_l2(grid, &a.add_scaled(-1.0, b).unwrap()).unwrap() / norm_l2(grid, b).unwrap()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}
