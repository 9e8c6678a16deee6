use grassflow::development::undevelop;
use grassflow::hierarchy::offblock_field;
use grassflow::lie::*;
use grassflow::presets::gaussian_block;
use grassflow::*;
use proptest::prelude::*;

fn orbit() -> impl Strategy<Value = OrbitParams> {
    prop_oneof![Just((2, 1)), Just((3, 1)), Just((3, 2)), Just((4, 2))].prop_map(|(n, k)| OrbitParams::new(n, k).unwrap())
}

fn matrix(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| CMat::from_iterator(n, n, v.into_iter().map(|(re, im)| C64::new(re, im))))
}

fn orbit_and_skew() -> impl Strategy<Value = (OrbitParams, CMat, CMat)> {
    orbit().prop_flat_map(|p| {
        let n = p.n();
        (Just(p), matrix(n).prop_map(|m| skew_part(&m)), matrix(n).prop_map(|m| skew_part(&m)))
    })
}

/// `exp` of a skew matrix through its Hermitian eigendecomposition.
fn unitary_from(x: &CMat) -> CMat {
    let h = x * C64::new(0.0, -1.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(h);
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| C64::new(0.0, l).exp()));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ad_a_inverts_on_perp((p, x, _) in orbit_and_skew()) {
        let v = perp_part(&x, &p);
        let back = ad_a_inv(&ad_a(&v, &p), &p).unwrap();
        prop_assert!(max_abs(&(back - &v)) < 1e-14);
        prop_assert!(max_abs(&par_part(&ad_a(&v, &p), &p)) == 0.0);
    }

    #[test]
    fn split_is_orthogonal((p, x, _) in orbit_and_skew()) {
        let par = par_part(&x, &p);
        let perp = perp_part(&x, &p);
        prop_assert!(inner(&par, &perp).unwrap().abs() < 1e-14);
        prop_assert!(max_abs(&(&par + &perp - &x)) < 1e-15);
        prop_assert!(inner(&x, &x).unwrap() >= 0.0);
    }

    #[test]
    fn conjugates_of_base_point_lie_on_orbit((p, x, w) in orbit_and_skew()) {
        let g = unitary_from(&x);
        prop_assert!(unitarity_defect(&g) < 1e-13);
        let gamma = &g * p.a() * g.adjoint();
        prop_assert!(orbit_residual(&gamma, &p) < 1e-13);
        let snapped = project_to_orbit(&gamma);
        prop_assert!(max_abs(&(snapped - &gamma)) < 1e-12);
        // tangent projection: idempotent, commutator of gamma with something
        let t = tangent_projection(&gamma, &w);
        prop_assert!(max_abs(&(tangent_projection(&gamma, &t) - &t)) < 1e-13);
        let ad2 = commutator(&gamma, &commutator(&gamma, &t));
        prop_assert!(max_abs(&(ad2 + &t)) < 1e-13);
    }

    #[test]
    fn polar_factor_is_unitary((_, x, y) in orbit_and_skew()) {
        let g = unitary_from(&x) + y * C64::new(1e-3, 0.0);
        prop_assert!(unitarity_defect(&reunitarize(&g)) < 1e-13);
    }

    #[test]
    fn fourier_modes_differentiate_exactly(mode in 1i32..40, order in 1u32..4) {
        let g = Grid::new(10.0, 128).unwrap();
        let k = std::f64::consts::PI * mode as f64 / 10.0;
        let f = ScalarField::from_fn(&g, |x| (k * x).sin());
        let want = ScalarField::from_fn(&g, |x| match order % 4 {
            1 => k * (k * x).cos(),
            2 => -k * k * (k * x).sin(),
            _ => -k.powi(3) * (k * x).cos(),
        });
        prop_assert!(f.derivative(order).distance(&want).unwrap() < 1e-9 * k.powi(order as i32).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn undeveloped_frames_stay_unitary(p in orbit(), seed in 0u64..1000) {
        let g = Grid::new(20.0, 128).unwrap();
        let u = offblock_field(&gaussian_block(&g, &p, seed), &p).unwrap();
        let fp = undevelop(&u, &p).unwrap();
        let d = fp.diagnostics();
        prop_assert!(!d.flagged, "{d:?}");
        prop_assert!(fp.path().orbit_residual(&p) < 1e-10);
    }
}
