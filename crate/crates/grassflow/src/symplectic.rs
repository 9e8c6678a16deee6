//! Poisson operators `T_u`, `P_u`, `L_gamma`, the symplectic forms `w_k` on
//! fields and `tau_k` on paths, the tangency constraints of the constrained
//! tangent spaces, and the pullback identity between the two families.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::development::FramedPath;
use crate::error::{Error, Result};
use crate::field::MatrixField;
use crate::lie::{self, CMat, OrbitParams, C64};

/// Characterization residual above which [`p_u`] flags its result.
/// Fields whose tails have not decayed below this level at `x = +-L` get an
/// extra allowance of `SEAM_FACTOR * boundary_decay(v)` for the kink of the
/// periodic extension.
pub const CHARACTERIZATION_TOL: f64 = 1e-9;

pub const SEAM_FACTOR: f64 = 10.0;

/// Boundary residual below which a variation counts as constrained.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

fn check_perp(name: &str, v: &MatrixField, params: &OrbitParams) -> Result<()> {
    let n = params.n();
    if v.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("{name}: {:?} matrices for n = {n}", v.shape())));
    }
    let par = v.par_defect(params);
    if par > 1e-8 * v.max_norm().max(1.0) {
        return Err(Error::Domain(format!("{name} has a u(n)_a component of size {par:.3e}")));
    }
    Ok(())
}

/// `T_u(v)(x) = int_{-inf}^x pi_a [u, v]`.
pub fn t_u(u: &MatrixField, v: &MatrixField, params: &OrbitParams) -> Result<MatrixField> {
    check_perp("u", u, params)?;
    check_perp("v", v, params)?;
    Ok(u.bracket(v)?.par(params).cumint())
}

/// `P_u(v) = v_x + pi_perp [u, v] - [u, T_u(v)]` without diagnostics.
pub(crate) fn apply_p(u: &MatrixField, v: &MatrixField, params: &OrbitParams) -> Result<MatrixField> {
    let uv = u.bracket(v)?;
    let t = uv.par(params).cumint();
    let out = v.ddx().add(&uv.perp(params))?.sub(&u.bracket(&t)?)?;
    Ok(out.perp(params))
}

/// Output of [`p_u`].
#[derive(Clone, Debug)]
pub struct PuResult {
    pub pv: MatrixField,
    /// `v - T_u(v)`.
    pub vtilde: MatrixField,
    /// `max |P_u(v) - (vtilde_x + [u, vtilde])|`, with `vtilde_x` taken by the
    /// step-corrected spectral derivative.
    pub characterization_residual: f64,
    pub flagged: bool,
}

pub fn p_u(u: &MatrixField, v: &MatrixField, params: &OrbitParams) -> Result<PuResult> {
    check_perp("u", u, params)?;
    check_perp("v", v, params)?;
    let pv = apply_p(u, v, params)?;
    let vtilde = v.sub(&u.bracket(v)?.par(params).cumint())?;
    let alt = vtilde.ddx_asymptotic().add(&u.bracket(&vtilde)?)?;
    let characterization_residual = pv.distance(&alt)?;
    let tol = CHARACTERIZATION_TOL * v.max_norm().max(1.0) + SEAM_FACTOR * v.boundary_decay();
    Ok(PuResult {
        pv,
        vtilde,
        characterization_residual,
        flagged: !(characterization_residual < tol),
    })
}

/// Output of [`l_gamma`].
#[derive(Clone, Debug)]
pub struct LGamma {
    pub value: MatrixField,
    /// `max |[gamma, zeta]|` for `zeta = g(-T_u(v))g^{-1}`.
    pub normal_defect: f64,
    /// Normal part of `(eta + zeta)_x`.
    pub tangent_defect: f64,
    /// `max |L_gamma(eta) - (eta + zeta)_x|`.
    pub characterization_residual: f64,
}

/// `L_gamma(g v g^{-1}) = g P_u(v) g^{-1}`, with the geometric cross-check.
pub fn l_gamma(fp: &FramedPath, eta: &MatrixField) -> Result<LGamma> {
    let v = fp.pull_back_tangent(eta)?;
    let params = fp.params();
    let pv = apply_p(fp.u(), &v, params)?;
    let value = pv.conjugate_by(fp.frames());
    let zeta = fp.u().bracket(&v)?.par(params).cumint().scale(-1.0).conjugate_by(fp.frames());
    let normal_defect = fp.gamma().bracket(&zeta)?.max_norm();
    let d = eta.add(&zeta)?.ddx_asymptotic();
    let tangent = fp.gamma().zip_map(&d, lie::tangent_projection)?;
    let tangent_defect = d.distance(&tangent)?;
    let characterization_residual = value.distance(&d)?;
    Ok(LGamma { value, normal_defect, tangent_defect, characterization_residual })
}

/// `L_gamma` without diagnostics.
fn apply_l(fp: &FramedPath, eta: &MatrixField) -> Result<MatrixField> {
    let v = fp.pull_back_tangent(eta)?;
    Ok(apply_p(fp.u(), &v, fp.params())?.conjugate_by(fp.frames()))
}

fn int_re_trace(x: &MatrixField, y: &MatrixField) -> Result<f64> {
    Ok(-x.l2_pairing(y)?)
}

fn sign(k: i32) -> f64 {
    if (1 - k).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Order-`k` form on fields, `k <= 0`:
/// `(-1)^{1-k} int tr(((ad(a)^{-1} P_u)^{-k} ad(a)^{-1} v1) v2)`.
pub fn w_k(u: &MatrixField, v1: &MatrixField, v2: &MatrixField, params: &OrbitParams, k: i32) -> Result<f64> {
    if k > 0 {
        return Err(Error::Parameter(format!("w_k is implemented for k <= 0, got {k}")));
    }
    check_perp("u", u, params)?;
    check_perp("v1", v1, params)?;
    check_perp("v2", v2, params)?;
    let mut z = v1.map(|x| lie::ad_a_inv_perp(x, params));
    for _ in 0..(-k) {
        z = apply_p(u, &z, params)?.map(|x| lie::ad_a_inv_perp(x, params));
    }
    Ok(sign(k) * int_re_trace(&z, v2)?)
}

/// The order-zero pairing `int <-ad(a)^{-1} v1, v2>` on fields.
pub fn w_hat(v1: &MatrixField, v2: &MatrixField, params: &OrbitParams) -> Result<f64> {
    v1.map(|x| -lie::ad_a_inv_perp(x, params)).l2_pairing(v2)
}

/// Output of [`w_1`].
#[derive(Clone, Debug)]
pub struct W1 {
    pub value: f64,
    /// Solution of `P_u(z) = v1`.
    pub z: MatrixField,
    /// `max |P_u(z) - v1|`.
    pub residual: f64,
}

/// Residual above which the `w_1` solve is reported as non-membership.
pub const W1_SOLVE_TOL: f64 = 1e-6;

fn perp_coords(params: &OrbitParams) -> Vec<(usize, usize)> {
    let (k, m) = params.block_shape();
    (0..k).flat_map(|i| (0..m).map(move |j| (i, k + j))).collect()
}

/// `int tr(P_u^{-1}(v1) v2)`, with `P_u^{-1}` realized by a dense
/// collocation solve anchored at `z(x_0) = 0`.
pub fn w_1(u: &MatrixField, v1: &MatrixField, v2: &MatrixField, params: &OrbitParams) -> Result<W1> {
    check_perp("u", u, params)?;
    check_perp("v1", v1, params)?;
    check_perp("v2", v2, params)?;
    let grid = u.grid();
    let n_pts = grid.len();
    let coords = perp_coords(params);
    let per = 2 * coords.len();
    let unknowns = n_pts * per;
    let flatten = |f: &MatrixField, out: &mut [f64]| {
        for (m, x) in f.values().iter().enumerate() {
            for (c, &(i, j)) in coords.iter().enumerate() {
                out[m * per + 2 * c] = x[(i, j)].re;
                out[m * per + 2 * c + 1] = x[(i, j)].im;
            }
        }
    };
    let basis = |col: usize| {
        let (m, r) = (col / per, col % per);
        let (i, j) = coords[r / 2];
        let z = if r % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
        let mut x = CMat::zeros(params.n(), params.n());
        x[(i, j)] = z;
        x[(j, i)] = -z.conj();
        let mut values = vec![CMat::zeros(params.n(), params.n()); n_pts];
        values[m] = x;
        MatrixField::new(grid.clone(), values)
    };
    // extra rows: z(x_0) = 0 and no content in the Nyquist mode, which the
    // spectral derivative cannot see
    let mut a = DMatrix::<f64>::zeros(unknowns + 2 * per, unknowns);
    let mut col_buf = vec![0.0; unknowns];
    for col in 0..unknowns {
        let image = apply_p(u, &basis(col)?, params)?;
        flatten(&image, &mut col_buf);
        for (r, &v) in col_buf.iter().enumerate() {
            a[(r, col)] = v;
        }
    }
    for r in 0..per {
        a[(unknowns + r, r)] = 1.0;
        for m in 0..n_pts {
            a[(unknowns + per + r, m * per + r)] = if m % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    let mut b = DVector::<f64>::zeros(unknowns + 2 * per);
    flatten(v1, &mut col_buf);
    b.rows_mut(0, unknowns).copy_from_slice(&col_buf);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::NumericalFailure(format!("w_1 solve failed: {e}")))?;
    let z = MatrixField::from_fn(grid, |_| CMat::zeros(params.n(), params.n()));
    let z = z.map_indexed(|m, _| {
        let mut x = CMat::zeros(params.n(), params.n());
        for (c, &(i, j)) in coords.iter().enumerate() {
            let w = C64::new(sol[m * per + 2 * c], sol[m * per + 2 * c + 1]);
            x[(i, j)] = w;
            x[(j, i)] = -w.conj();
        }
        x
    });
    let residual = apply_p(u, &z, params)?.distance(v1)?;
    if !(residual < W1_SOLVE_TOL * v1.max_norm().max(1.0)) {
        return Err(Error::Precondition(format!(
            "v1 is not in the image of P_u on this grid (solve residual {residual:.3e})"
        )));
    }
    Ok(W1 { value: int_re_trace(&z, v2)?, z, residual })
}

fn check_tangent(name: &str, gamma: &MatrixField, d: &MatrixField) -> Result<()> {
    let back = gamma.zip_map(d, lie::tangent_projection)?;
    let defect = back.distance(d)?;
    if defect > 1e-8 * d.max_norm().max(1.0) {
        return Err(Error::Domain(format!("{name} is not tangent to the path (defect {defect:.3e})")));
    }
    Ok(())
}

/// Order-`k` form on paths, `k <= 0`:
/// `(-1)^{1-k} int tr(((ad(gamma)^{-1} L_gamma)^{-k} ad(gamma)^{-1} d1) d2)`.
pub fn tau_k(fp: &FramedPath, d1: &MatrixField, d2: &MatrixField, k: i32) -> Result<f64> {
    if k > 0 {
        return Err(Error::Parameter(format!("tau_k is implemented for k <= 0, got {k}")));
    }
    let gamma = fp.gamma();
    check_tangent("d1", gamma, d1)?;
    check_tangent("d2", gamma, d2)?;
    let ad_inv = |x: &MatrixField| gamma.zip_map(x, |g, v| -lie::commutator(g, v));
    let mut z = ad_inv(d1)?;
    for _ in 0..(-k) {
        z = ad_inv(&apply_l(fp, &z)?)?;
    }
    Ok(sign(k) * int_re_trace(&z, d2)?)
}

/// The order-zero pairing `int <-ad(gamma)^{-1} d1, d2>` on paths.
pub fn tau_hat(gamma: &MatrixField, d1: &MatrixField, d2: &MatrixField) -> Result<f64> {
    check_tangent("d1", gamma, d1)?;
    gamma.zip_map(d1, lie::commutator)?.l2_pairing(d2)
}

/// Both sides of the pullback identity for one pair of tangents.
#[derive(Clone, Copy, Debug)]
pub struct Pullback {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// `w_k(u; dPhi d1, dPhi d2)` against `tau_{k-2}(d1, d2)`.
pub fn pullback_check(fp: &FramedPath, d1: &MatrixField, d2: &MatrixField, k: i32) -> Result<Pullback> {
    let e1 = crate::development::d_phi(fp, d1)?;
    let e2 = crate::development::d_phi(fp, d2)?;
    let lhs = w_k(fp.u(), &e1, &e2, fp.params(), k)?;
    let rhs = tau_k(fp, d1, d2, k - 2)?;
    let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + f64::EPSILON);
    Ok(Pullback { lhs, rhs, residual })
}

/// The chain `xi_{-1}, ..., xi_k` generated by a variation `du`.
#[derive(Clone, Debug)]
pub struct ConstraintChain {
    /// `xi[i]` holds `xi_{-1-i}`.
    pub xi: Vec<MatrixField>,
    /// `max |pi_a(xi_i)(x_{N-1})|` per level.
    pub boundary: Vec<f64>,
    /// `max |pi_a((xi_i)_x + [u, xi_i])|` per level.
    pub level_residuals: Vec<f64>,
}

impl ConstraintChain {
    /// Whether every level meets [`MEMBERSHIP_TOL`].
    pub fn is_member(&self) -> bool {
        self.boundary.iter().all(|&b| b < MEMBERSHIP_TOL)
    }
}

/// Builds `xi_{-1}, ..., xi_k` from `[xi_{-1}, a] = du` and
/// `(xi_i)_x + [u, xi_i] = [xi_{i-1}, a]`, with left-anchored `u(n)_a` parts.
pub fn constraint_residuals(u: &MatrixField, du: &MatrixField, params: &OrbitParams, k: i32) -> Result<ConstraintChain> {
    if k >= 0 {
        return Err(Error::Parameter(format!("constraint chains need k < 0, got {k}")));
    }
    check_perp("u", u, params)?;
    check_perp("du", du, params)?;
    let level = |perp: MatrixField| -> Result<MatrixField> {
        let par = u.bracket(&perp)?.par(params).cumint().scale(-1.0);
        perp.add(&par)
    };
    let mut xi = vec![level(du.map(|x| lie::ad_a(&lie::perp_part(x, params), params)))?];
    let mut level_residuals = Vec::new();
    for _ in 1..(-k) {
        let last = xi.last().expect("non-empty");
        let src = last.ddx_asymptotic().add(&u.bracket(last)?)?;
        level_residuals.push(src.par_defect(params));
        xi.push(level(src.map(|x| lie::ad_a(&lie::perp_part(x, params), params)))?);
    }
    let last = xi.last().expect("non-empty");
    let src = last.ddx_asymptotic().add(&u.bracket(last)?)?;
    level_residuals.push(src.par_defect(params));
    let boundary = xi.iter().map(|x| lie::max_abs(&lie::par_part(x.last(), params))).collect();
    Ok(ConstraintChain { xi, boundary, level_residuals })
}

fn boundary_vector(chain: &ConstraintChain, params: &OrbitParams) -> Vec<f64> {
    let n = params.n();
    let mut out = Vec::new();
    for x in &chain.xi {
        let b = x.last();
        for i in 0..n {
            for j in 0..n {
                if params.is_par_entry(i, j) && i <= j {
                    out.push(b[(i, j)].re);
                    out.push(b[(i, j)].im);
                }
            }
        }
    }
    out
}

/// Random linear combinations of `candidates` whose constraint chains close
/// at every level `-1, ..., -levels`.
///
/// The boundary values are linear in the variation, so the admissible
/// combinations form the null space of a small dense matrix.
pub fn constrained_combinations<R: Rng>(
    u: &MatrixField,
    params: &OrbitParams,
    levels: usize,
    candidates: &[MatrixField],
    count: usize,
    rng: &mut R,
) -> Result<Vec<MatrixField>> {
    if levels == 0 {
        return Err(Error::Parameter("need at least one constraint level".into()));
    }
    let cols: Vec<Vec<f64>> = candidates
        .iter()
        .map(|c| constraint_residuals(u, c, params, -(levels as i32)).map(|ch| boundary_vector(&ch, params)))
        .collect::<Result<_>>()?;
    let rows = cols.first().map_or(0, Vec::len);
    let m = candidates.len();
    let c = DMatrix::from_fn(rows.max(m), m, |r, j| if r < rows { cols[j][r] } else { 0.0 });
    let svd = c.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NumericalFailure("SVD failed".into()))?;
    let smax = svd.singular_values.max();
    let null: Vec<DVector<f64>> = (0..m)
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax.max(1e-300))
        .map(|i| v_t.row(i).transpose())
        .collect();
    if null.is_empty() {
        return Err(Error::Precondition(format!(
            "{m} candidates leave no admissible combination for {levels} constraint levels"
        )));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut coeff = DVector::<f64>::zeros(m);
        for v in &null {
            let s: f64 = rng.sample(StandardNormal);
            coeff += v * s;
        }
        let norm = coeff.norm();
        let mut acc = candidates[0].scale(0.0);
        for (w, cand) in coeff.iter().zip(candidates) {
            acc = acc.axpy(w / norm, cand)?;
        }
        out.push(acc);
    }
    Ok(out)
}
