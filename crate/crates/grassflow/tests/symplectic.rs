use grassflow::development::undevelop;
use grassflow::hierarchy::{compute_hierarchy, offblock_field};
use grassflow::lie::ad_a;
use grassflow::presets::{gaussian_block, random_perp_bump, soliton};
use grassflow::symplectic::*;
use grassflow::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `[P_u(z), a]` is not automatically admissible: its chain fails to close at
/// the boundary, so tangents are built from the null space instead.
#[test]
fn image_of_poisson_operator_is_not_constrained() {
    let g = Grid::new(20.0, 256).unwrap();
    let p = OrbitParams::new(2, 1).unwrap();
    let u = soliton(&g, &p);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = random_perp_bump(&g, &p, &mut rng);
    let du = p_u(&u, &z, &p).unwrap().pv.map(|x| -ad_a(x, &p));
    let chain = constraint_residuals(&u, &du, &p, -2).unwrap();
    assert!(!chain.is_member(), "{:?}", chain.boundary);

    let cands: Vec<MatrixField> = (0..12).map(|_| random_perp_bump(&g, &p, &mut rng)).collect();
    let vs = constrained_combinations(&u, &p, 2, &cands, 3, &mut rng).unwrap();
    for v in &vs {
        assert!(constraint_residuals(&u, v, &p, -2).unwrap().is_member());
    }
}

#[test]
fn pullback_on_three_by_three_orbit() {
    let g = Grid::new(20.0, 256).unwrap();
    let p = OrbitParams::new(3, 1).unwrap();
    let u = offblock_field(&gaussian_block(&g, &p, 4), &p).unwrap();
    let fp = undevelop(&u, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cands: Vec<MatrixField> = (0..30).map(|_| random_perp_bump(&g, &p, &mut rng)).collect();
    let vs = constrained_combinations(&u, &p, 3, &cands, 4, &mut rng).unwrap();
    let ds: Vec<MatrixField> = vs.iter().map(|v| v.scale(-1.0).conjugate_by(fp.frames())).collect();
    for k in [0, -1] {
        for pair in ds.chunks(2) {
            let r = pullback_check(&fp, &pair[0], &pair[1], k).unwrap();
            assert!(r.residual < 1e-6, "k = {k}: {r:?}");
        }
    }
}

#[test]
fn first_form_is_antisymmetric() {
    let g = Grid::new(10.0, 64).unwrap();
    let p = OrbitParams::new(2, 1).unwrap();
    let u = offblock_field(&gaussian_block(&g, &p, 2), &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let generic = random_perp_bump(&g, &p, &mut rng);
    assert!(matches!(w_1(&u, &generic, &generic, &p), Err(Error::Precondition(_))));
    // integration by parts leaves tr(T_u(z1) T_u(z2)) at +inf
    let z1 = random_perp_bump(&g, &p, &mut rng);
    let z2 = random_perp_bump(&g, &p, &mut rng);
    let pair = |z1: &MatrixField, z2: &MatrixField| {
        let v1 = p_u(&u, z1, &p).unwrap().pv;
        let v2 = p_u(&u, z2, &p).unwrap().pv;
        w_1(&u, &v1, &v2, &p).unwrap().value + w_1(&u, &v2, &v1, &p).unwrap().value
    };
    let tail = |z: &MatrixField| t_u(&u, z, &p).unwrap().last().clone();
    let boundary = (tail(&z1) * tail(&z2)).trace().re;
    assert!(boundary.abs() > 1e-3);
    let sum = pair(&z1, &z2);
    assert!((sum - boundary).abs() < 1e-6, "{sum} vs {boundary}");

    // with n = 2, k = 1 the tail lives on diag(i, -i); cancel it
    let z3 = random_perp_bump(&g, &p, &mut rng);
    let (t2, t3) = (tail(&z2)[(0, 0)].im, tail(&z3)[(0, 0)].im);
    let zc = z2.scale(t3).sub(&z3.scale(t2)).unwrap();
    assert!(tail(&zc).norm() < 1e-12);
    let sum = pair(&z1, &zc);
    assert!(sum.abs() < 1e-8, "{sum}");
}

#[test]
fn poisson_operator_maps_gradients_to_flows() {
    let g = Grid::new(20.0, 256).unwrap();
    let p = OrbitParams::new(4, 2).unwrap();
    let u = offblock_field(&gaussian_block(&g, &p, 6), &p).unwrap();
    let t = compute_hierarchy(&u, &p, 5).unwrap();
    for j in 1..=3 {
        let r = p_u(&u, &t.gradient(j).unwrap(), &p).unwrap();
        let want = t.flow_rhs(j + 1).unwrap();
        assert!(r.pv.distance(&want).unwrap() < 1e-8 * want.max_norm().max(1.0));
    }
}
