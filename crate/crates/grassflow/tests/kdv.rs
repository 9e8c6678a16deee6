use grassflow::kdv::*;
use grassflow::presets::random_scalar_bump;
use grassflow::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> Grid {
    Grid::new(20.0, 256).unwrap()
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

fn real(rows: [[f64; 2]; 2]) -> CMat {
    CMat::from_fn(2, 2, |i, j| C64::new(rows[i][j], 0.0))
}

fn e12() -> CMat {
    real([[0.0, 1.0], [0.0, 0.0]])
}

fn e21() -> CMat {
    real([[0.0, 0.0], [1.0, 0.0]])
}

#[test]
fn lax_fields_of_zero_and_sech_squared() {
    let g = grid();
    let f = kdv_lax_fields(&ScalarField::zeros(&g));
    assert_eq!(f.q2.max_norm(), 0.0);
    assert_eq!(f.q3.max_norm(), 0.0);
    assert_eq!(f.u2.at(7), &e21());

    let q = ScalarField::from_fn(&g, |x| sech(x).powi(2));
    let f = kdv_lax_fields(&q);
    // (sech^2)'' = 4 sech^2 - 6 sech^4
    let top = f.q3.entry(0, 1);
    let worst = g
        .points()
        .iter()
        .zip(&top)
        .map(|(&x, z)| (z.re - 0.25 * (4.0 * sech(x).powi(2) - 8.0 * sech(x).powi(4))).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst:e}");
    for m in [0, 100, 200] {
        assert!(f.q2.at(m).trace().norm() < 1e-15 && f.q3.at(m).trace().norm() < 1e-15);
    }
}

#[test]
fn reality_pattern_examples() {
    let base = LaurentCoeffs::from_iter([(1, a2()), (0, e21())]);
    assert_eq!(reality_residual(&base).unwrap(), 0.0);
    let bumped = LaurentCoeffs::from_iter([(1, a2() + e12() * C64::new(0.3, 0.0)), (0, e21())]);
    assert!((reality_residual(&bumped).unwrap() - 0.3).abs() < 1e-15);
    let complex = LaurentCoeffs::from_iter([(0, e21() * C64::new(0.0, 1.0))]);
    assert!(matches!(reality_residual(&complex), Err(Error::Domain(_))));
}

#[test]
fn lax_polynomial_satisfies_reality_pointwise() {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = random_scalar_bump(&g, &mut rng);
    let f = kdv_lax_fields(&q);
    for m in 0..g.len() {
        assert!(reality_residual(&f.laurent_at(m)).unwrap() < 1e-10);
    }
}

#[test]
fn recursion_operator_examples() {
    let g = grid();
    assert_eq!(j_minus1(&ScalarField::zeros(&g)).max_abs(), 0.0);
    let l = g.half_width();
    let k = std::f64::consts::PI / l;
    let v = ScalarField::from_fn(&g, |x| (k * x).sin());
    let want = ScalarField::from_fn(&g, |x| -2.0 * k * (k * x).cos());
    assert!(j_minus1(&v).distance(&want).unwrap() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = random_scalar_bump(&g, &mut rng);
    let half = w.derivative(3).scale(0.5);
    assert!(j_1(&ScalarField::zeros(&g), &w).unwrap().distance(&half).unwrap() < 1e-12);
    let q = random_scalar_bump(&g, &mut rng);
    let c = ScalarField::from_fn(&g, |_| 0.7);
    assert!(j_1(&q, &c).unwrap().distance(&q.ddx().scale(-0.7)).unwrap() < 1e-12);
}

#[test]
fn derivation_of_operators() {
    let g = grid();
    let zero = ScalarField::zeros(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let q = random_scalar_bump(&g, &mut rng);
    assert_eq!(derivation_residuals(&q, &zero).unwrap().max(), 0.0);
    let c = ScalarField::from_fn(&g, |x| (-x * x).exp());
    assert!(derivation_residuals(&zero, &c).unwrap().max() < 1e-8);
    for _ in 0..10 {
        let q = random_scalar_bump(&g, &mut rng);
        let c = random_scalar_bump(&g, &mut rng);
        let r = derivation_residuals(&q, &c).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
    }
}

/// Every element of the real pattern, one unit entry at a time, on indices `lo..=hi`.
fn pattern_basis(lo: i32, hi: i32) -> Vec<LaurentCoeffs> {
    let mut out = Vec::new();
    let mut even = lo - lo.rem_euclid(2);
    while even <= hi {
        for (a, b, c) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)] {
            let xi = real([[a, b], [c, -a]]);
            let next = real([[c, -2.0 * a], [0.0, -c]]);
            let l = LaurentCoeffs::from_iter([(even, xi), (even + 1, next)]);
            assert_eq!(reality_residual(&l).unwrap(), 0.0);
            out.push(l);
        }
        even += 2;
    }
    out
}

/// `b e_12` pairs to zero with the whole pattern space for even `k` and not for odd `k`.
#[test]
fn pairing_degenerate_for_even_k() {
    let b = 1.7;
    let probe = LaurentCoeffs::from_iter([(0, e12() * C64::new(b, 0.0))]);
    assert_eq!(reality_residual(&probe).unwrap(), 0.0);
    let basis = pattern_basis(-8, 8);
    for k in [-4, -2, 0, 2] {
        assert!(basis.iter().all(|eta| lambda_pairing(&probe, eta, k) == 0.0), "k = {k}");
    }
    for k in [-3, -1, 1, 3] {
        let hit = basis.iter().map(|eta| lambda_pairing(&probe, eta, k).abs()).fold(0.0, f64::max);
        assert!((hit - b).abs() < 1e-15, "k = {k}");
    }
}

#[test]
fn skew_adjointness() {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..5 {
        let q = random_scalar_bump(&g, &mut rng);
        let v = random_scalar_bump(&g, &mut rng);
        let w = random_scalar_bump(&g, &mut rng);
        let a = j_minus1(&v).l2_pairing(&w).unwrap() + v.l2_pairing(&j_minus1(&w)).unwrap();
        let b = j_1(&q, &v).unwrap().l2_pairing(&w).unwrap() + v.l2_pairing(&j_1(&q, &w).unwrap()).unwrap();
        assert!(a.abs() < 1e-10 && b.abs() < 1e-9, "{a:e} {b:e}");
    }
}
