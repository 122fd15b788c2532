mod common;

use common::{bumps, close, field_of, problem, rel_l2, signed_bumps, WELL};
use nodal_core::discretization::norm_l2;
use nodal_core::eigensolver::{principal_eigenpair, second_eigenpair, EigenOptions, Eigenpair};
use nodal_core::functionals::{energy, weight_of, weighted_inner, WeightField};
use nodal_core::{Field, GridMode, Problem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pairs(pr: &Problem, u: &Field) -> (WeightField, Eigenpair, Eigenpair) {
    let opts = EigenOptions::default();
    let w = weight_of(pr.grid(), u, 4.0).unwrap();
    let first = principal_eigenpair(pr.operator(), &w, &opts).unwrap();
    let second = second_eigenpair(pr.operator(), &w, &first, &opts).unwrap();
    (w, first, second)
}

fn line() -> Problem {
    problem(&WELL, GridMode::Cartesian1d, 12.0, 0.02, 4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn span_inequality_and_orthogonality(b in signed_bumps(4, 5.0), seed in any::<u64>()) {
        let pr = line();
        let grid = pr.grid();
        let u = field_of(grid, &b);
        let (w, first, second) = pairs(&pr, &u);
        prop_assert!(second.mu >= first.mu);
        // Gram matrix of (v1, v2) in the energy form
        let op = pr.operator();
        let g11 = op.energy_form(&first.v, &first.v).unwrap();
        let g22 = op.energy_form(&second.v, &second.v).unwrap();
        let g12 = op.energy_form(&first.v, &second.v).unwrap();
        prop_assert!(g11 > 0.0 && g22 > 0.0);
        prop_assert!(g12.abs() <= 1e-8 * (g11 * g22).sqrt(), "{g12}");

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let (c1, c2): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let v = first.v.zip_map(&second.v, |a, b| c1 * a + c2 * b).unwrap();
            let k = weighted_inner(grid, &w, &v, &v).unwrap();
            prop_assert!(energy(op, &v).unwrap() <= second.mu * k + 1e-8);
        }
    }

    #[test]
    fn eigen_residuals_meet_tolerance(b in bumps(4, 5.0)) {
        let pr = line();
        let grid = pr.grid();
        let u = field_of(grid, &b);
        let (w, first, second) = pairs(&pr, &u);
        let tol = EigenOptions::default().residual_tol;
        for pair in [&first, &second] {
            let av = pr.operator().apply(&pair.v).unwrap();
            let wv = Field::from_values(
                grid,
                pair.v.values().iter().zip(w.values()).map(|(v, w)| v * w).collect(),
            ).unwrap();
            let r = av.add_scaled(-pair.mu, &wv).unwrap();
            let lhs = norm_l2(grid, &r).unwrap();
            prop_assert!(lhs <= tol * pair.mu * norm_l2(grid, &wv).unwrap(), "{lhs}");
        }
    }

    #[test]
    fn principal_pair_is_even_in_u(b in bumps(4, 5.0)) {
        let pr = line();
        let u = field_of(pr.grid(), &b);
        let (_, a, _) = pairs(&pr, &u);
        let (_, n, _) = pairs(&pr, &-&u);
        prop_assert_eq!(a.mu, n.mu);
        prop_assert_eq!(a.v.values(), n.v.values());
    }
}

#[test]
fn principal_pair_is_continuous_in_u() {
    let pr = line();
    let grid = pr.grid();
    let u = field_of(grid, &[(1.0, -2.0, 0.0, 1.5), (-0.8, 3.0, 0.0, 1.2)]);
    let delta = Field::from_fn(grid, |n| {
        (1.7 * n.coords[0]).sin() * (-n.coords[0].powi(2) / 20.0).exp()
    });
    let scale = 1e-3 * norm_l2(grid, &u).unwrap() / norm_l2(grid, &delta).unwrap();
    let perturbed = u.add_scaled(scale, &delta).unwrap();
    let (_, a, _) = pairs(&pr, &u);
    let (_, b, _) = pairs(&pr, &perturbed);
    assert!(close(a.mu, b.mu, 1e-2));
    assert!(rel_l2(grid, &b.v, &a.v) <= 1e-2);
}

/// For `u` even in `x` the pencil decouples by parity and `v2` is odd.
#[test]
fn second_eigenfunction_of_an_even_weight_is_odd() {
    let pr = line();
    let grid = pr.grid();
    let u = field_of(
        grid,
        &[
            (1.0, 2.5, 0.0, 1.5),
            (1.0, -2.5, 0.0, 1.5),
            (-0.4, 0.0, 0.0, 1.0),
        ],
    );
    let (_, first, second) = pairs(&pr, &u);
    assert!(second.mu > first.mu);
    let v = second.v.values();
    let n = v.len();
    let vmax = second.v.max_abs();
    let odd_defect = (0..n)
        .map(|i| (v[i] + v[n - 1 - i]).abs())
        .fold(0.0, f64::max);
    assert!(odd_defect <= 1e-6 * vmax, "{odd_defect}");
}
