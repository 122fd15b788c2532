mod common;

use common::{bumps, close, field_of, problem, FLAT, WELL};
use nodal_core::variational::{ground_state, DescentOptions};
use nodal_core::verification::{decay_fit, nodality, residual_eq};
use nodal_core::{Field, Grid, GridMode};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn signed_masses_are_p_homogeneous(b in bumps(4, 5.0), t in prop_oneof![-4.0f64..-0.2, 0.2f64..4.0], p in 2.5f64..6.0) {
        let grid = Grid::new(GridMode::Cartesian1d, 12.0, 0.02).unwrap();
        let u = field_of(&grid, &b);
        let a = nodality(&grid, &u, p, 1e-3).unwrap();
        let s = nodality(&grid, &u.scaled(t), p, 1e-3).unwrap();
        let f = t.abs().powf(p);
        let (pos, neg) = if t > 0.0 { (s.pos_mass, s.neg_mass) } else { (s.neg_mass, s.pos_mass) };
        prop_assert!(close(pos, f * a.pos_mass, 1e-12) && close(neg, f * a.neg_mass, 1e-12));
        prop_assert_eq!(s.is_nodal, a.is_nodal);
    }

    #[test]
    fn decay_rate_is_scale_invariant(rate in 0.5f64..2.0, c in 0.1f64..10.0, t in 1e-3f64..1e3) {
        let grid = Grid::new(GridMode::Radial { dim: 2 }, 12.0, 0.02).unwrap();
        let u = Field::from_fn(&grid, |n| c * (-rate * n.radius).exp() / n.radius.sqrt());
        let a = decay_fit(&grid, &u, rate * rate, 2).unwrap();
        let b = decay_fit(&grid, &u.scaled(t), rate * rate, 2).unwrap();
        prop_assert!((a.fitted_rate - b.fitted_rate).abs() <= 1e-12 * a.fitted_rate);
        prop_assert!(close(b.fitted_c0, t * a.fitted_c0, 1e-10));
    }
}

#[test]
fn odd_pair_has_balanced_masses() {
    let grid = Grid::new(GridMode::Cartesian1d, 15.0, 0.01).unwrap();
    let u = Field::from_fn(&grid, |n| {
        let x = n.coords[0];
        1.0 / (x - 3.0).cosh() - 1.0 / (x + 3.0).cosh()
    });
    let rep = nodality(&grid, &u, 4.0, 1e-3).unwrap();
    assert!((rep.pos_mass - rep.neg_mass).abs() <= 1e-10);
    assert!(rep.is_nodal);
}

#[test]
fn well_ground_state_decays_no_faster_than_the_limit() {
    let pr = problem(&WELL, GridMode::Cartesian1d, 15.0, 0.01, 4.0);
    let rep = ground_state(&pr, None, &DescentOptions::default()).unwrap();
    let fit = decay_fit(pr.grid(), rep.state(), 1.0, 1).unwrap();
    assert!(
        (0.5..=1.05).contains(&fit.fitted_rate),
        "{}",
        fit.fitted_rate
    );
}

/// On V ≡ 1 the interior stencil is translation invariant: away from the
/// boundary a one-cell shift of the computed ground state solves the discrete
/// equation as well as the state itself.
#[test]
fn residual_is_translation_consistent() {
    let pr = problem(&FLAT, GridMode::Cartesian1d, 15.0, 0.005, 4.0);
    let grid = pr.grid();
    let rep = ground_state(&pr, None, &DescentOptions::default()).unwrap();
    let w = rep.state().values();
    let shifted = Field::from_values(
        grid,
        (0..w.len())
            .map(|i| if i == 0 { 0.0 } else { w[i - 1] })
            .collect(),
    )
    .unwrap();
    let interior_residual = |u: &Field| {
        let au = pr.operator().apply(u).unwrap();
        let r = au
            .zip_map(u, |a, x| a - rep.lambda * x.abs().powi(2) * x)
            .unwrap();
        grid.nodes()
            .zip(r.values())
            .filter(|(n, _)| n.coords[0].abs() < 14.0)
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max)
    };
    let own = interior_residual(rep.state());
    let moved = interior_residual(&shifted);
    assert!(own <= 1e-7, "{own}");
    assert!(moved <= 2.0 * own.max(1e-12), "{moved} {own}");
    let total = residual_eq(pr.operator(), &shifted, rep.lambda, 4.0).unwrap();
    assert!(total <= 1e-4, "{total}");
}
