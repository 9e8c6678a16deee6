//! The development map between based paths on the orbit of `a` and perp-valued
//! fields, its inverse, its differential, the pulled-back Hamiltonians `H_j`
//! and the covariant derivative chain along a path.
//!
//! Both directions integrate a linear frame equation with a sixth-order
//! Magnus step, which keeps the frame unitary up to round-off. Coefficients at
//! the Gauss nodes of each sub-step come from band-limited interpolation.

use crate::error::{Error, Result};
use crate::field::MatrixField;
use crate::hierarchy::{self, HierarchyTable};
use crate::lie::{self, CMat, OrbitParams, C64};
use crate::symplectic;

/// Magnus sub-steps per grid cell.
pub const SUBSTEPS: usize = 2;

/// Largest tolerated `|g^* g - I|` before re-unitarization.
pub const UNITARITY_TOL: f64 = 1e-8;

/// Largest tolerated `|gamma - g a g^*|` after `develop`.
pub const CONJUGATION_TOL: f64 = 1e-6;

fn gauss_nodes() -> [f64; 3] {
    let d = 15f64.sqrt() / 10.0;
    [0.5 - d, 0.5, 0.5 + d]
}

/// Sixth-order Magnus exponent for `y' = A(x) y` over a step `h`, from `A` at
/// the three Gauss nodes.
fn magnus6(a: [&CMat; 3], h: f64) -> CMat {
    let c = |x: f64| C64::new(x, 0.0);
    let a1 = a[1] * c(h);
    let a2 = (a[2] - a[0]) * c(15f64.sqrt() * h / 3.0);
    let a3 = (a[2] - a[1] * c(2.0) + a[0]) * c(10.0 * h / 3.0);
    let c1 = lie::commutator(&a1, &a2);
    let c2 = lie::commutator(&a1, &(&a3 * c(2.0) + &c1)) * c(-1.0 / 60.0);
    let lhs = &a1 * c(-20.0) - &a3 + &c1;
    let rhs = &a2 + &c2;
    &a1 + &a3 * c(1.0 / 12.0) + lie::commutator(&lhs, &rhs) * c(1.0 / 240.0)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    /// `g' = A g`
    Left,
    /// `g' = g A`
    Right,
}

/// Integrates a frame equation from `g(x_0) = I` across the grid.
///
/// `sample(s)` returns the coefficient field evaluated at `x_m + s`.
/// Returns the frames and the largest unitarity defect seen before each
/// re-unitarization.
fn transport(
    n: usize,
    len: usize,
    h: f64,
    side: Side,
    sample: impl Fn(f64) -> Result<MatrixField>,
) -> Result<(Vec<CMat>, f64)> {
    let hs = h / SUBSTEPS as f64;
    let nodes = gauss_nodes();
    let mut samples = Vec::with_capacity(SUBSTEPS);
    for s in 0..SUBSTEPS {
        let mut level = Vec::with_capacity(3);
        for c in nodes {
            let f = sample((s as f64 + c) * hs)?;
            level.push(if side == Side::Right { f.scale(-1.0) } else { f });
        }
        samples.push(level);
    }
    let mut g = CMat::identity(n, n);
    let mut frames = Vec::with_capacity(len);
    frames.push(g.clone());
    let mut drift: f64 = 0.0;
    for m in 0..len - 1 {
        for level in &samples {
            let omega = magnus6([level[0].at(m), level[1].at(m), level[2].at(m)], hs);
            g = match side {
                Side::Left => omega.exp() * &g,
                // y' = y A  <=>  (y^*)' = -A y^*
                Side::Right => &g * (-omega).exp(),
            };
        }
        let d = lie::unitarity_defect(&g);
        if !d.is_finite() {
            return Err(Error::NumericalFailure(format!("frame transport diverged at cell {m}")));
        }
        drift = drift.max(d);
        g = lie::reunitarize(&g);
        frames.push(g.clone());
    }
    Ok((frames, drift))
}

/// A sampled path on the orbit of `a` starting at `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannPath {
    gamma: MatrixField,
}

impl GrassmannPath {
    /// Largest accepted pointwise orbit residual.
    pub const ORBIT_TOL: f64 = 1e-8;
    /// Largest accepted `|gamma(x_0) - a|`.
    pub const BASE_TOL: f64 = 1e-6;

    pub fn new(gamma: MatrixField, params: &OrbitParams) -> Result<Self> {
        let n = params.n();
        if gamma.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "path of {:?} matrices for n = {n}",
                gamma.shape()
            )));
        }
        let orbit = gamma.values().iter().fold(0.0, |m: f64, x| m.max(lie::orbit_residual(x, params)));
        if !(orbit < Self::ORBIT_TOL) {
            return Err(Error::Validation {
                invariant: format!("orbit membership (residual {orbit:.3e})"),
            });
        }
        let base = lie::max_abs(&(gamma.first() - params.a()));
        if !(base < Self::BASE_TOL) {
            return Err(Error::Validation {
                invariant: format!("left boundary base point (|gamma(x_0) - a| = {base:.3e})"),
            });
        }
        Ok(Self { gamma })
    }

    /// The constant path at `a`.
    pub fn base(grid: &crate::field::Grid, params: &OrbitParams) -> Self {
        Self { gamma: MatrixField::constant(grid, params.a()) }
    }

    pub fn field(&self) -> &MatrixField {
        &self.gamma
    }

    pub fn into_field(self) -> MatrixField {
        self.gamma
    }

    /// Largest pointwise orbit residual.
    pub fn orbit_residual(&self, params: &OrbitParams) -> f64 {
        self.gamma.values().iter().fold(0.0, |m, x| m.max(lie::orbit_residual(x, params)))
    }
}

/// Numerical health of a frame integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameDiagnostics {
    /// Largest `|g^* g - I|` before re-unitarization.
    pub unitarity_drift: f64,
    /// Largest `|gamma - g a g^*|`.
    pub conjugation_residual: f64,
    pub flagged: bool,
}

/// A path together with its perp-framed lift and `u = g^{-1} g_x`.
#[derive(Clone, Debug)]
pub struct FramedPath {
    params: OrbitParams,
    gamma: MatrixField,
    frames: Vec<CMat>,
    u: MatrixField,
    diagnostics: FrameDiagnostics,
}

impl FramedPath {
    pub fn params(&self) -> &OrbitParams {
        &self.params
    }

    pub fn gamma(&self) -> &MatrixField {
        &self.gamma
    }

    pub fn path(&self) -> GrassmannPath {
        GrassmannPath { gamma: self.gamma.clone() }
    }

    pub fn frames(&self) -> &[CMat] {
        &self.frames
    }

    pub fn u(&self) -> &MatrixField {
        &self.u
    }

    pub fn diagnostics(&self) -> FrameDiagnostics {
        self.diagnostics
    }

    /// `max |g^{-1} g_x - u|`, with `g_x` taken spectrally.
    pub fn frame_residual(&self) -> Result<f64> {
        let g = MatrixField::new(self.gamma.grid().clone(), self.frames.clone())?;
        let gx = g.ddx_asymptotic();
        let lhs = gx.map_indexed(|m, d| self.frames[m].adjoint() * d);
        lhs.distance(&self.u)
    }

    /// Checks the perp-valued `delta` is tangent along the path and conjugates
    /// it back to `v = g^* delta g`.
    pub fn pull_back_tangent(&self, delta: &MatrixField) -> Result<MatrixField> {
        if delta.grid() != self.gamma.grid() || delta.shape() != self.gamma.shape() {
            return Err(Error::DimensionMismatch("tangent field does not match the path".into()));
        }
        let v = delta.conjugate_inverse(&self.frames);
        let par = v.par_defect(&self.params);
        if par > 1e-8 * v.max_norm().max(1.0) {
            return Err(Error::Domain(format!("variation is not tangent to the orbit (normal part {par:.3e})")));
        }
        Ok(v.perp(&self.params))
    }
}

fn check_perp(u: &MatrixField, params: &OrbitParams) -> Result<()> {
    let n = params.n();
    if u.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("field of {:?} matrices for n = {n}", u.shape())));
    }
    let par = u.par_defect(params);
    if par > 1e-10 * u.max_norm().max(1.0) {
        return Err(Error::Domain(format!("field has a u(n)_a component of size {par:.3e}")));
    }
    Ok(())
}

/// Inverse development: solves `g_x = g u`, `g(x_0) = I`, and returns
/// `gamma = g a g^{-1}`.
pub fn undevelop(u: &MatrixField, params: &OrbitParams) -> Result<FramedPath> {
    check_perp(u, params)?;
    let u = u.perp(params);
    let grid = u.grid().clone();
    let (frames, drift) = transport(params.n(), grid.len(), grid.spacing(), Side::Right, |s| Ok(u.shifted(s)))?;
    let gamma = MatrixField::new(grid, frames.iter().map(|g| g * params.a() * g.adjoint()).collect())?;
    Ok(FramedPath {
        params: params.clone(),
        gamma,
        frames,
        u,
        diagnostics: FrameDiagnostics {
            unitarity_drift: drift,
            conjugation_residual: 0.0,
            flagged: drift > UNITARITY_TOL,
        },
    })
}

/// Development: solves `g_x = [gamma, gamma_x] g`, `g(x_0) = I`, and returns
/// `u = ad(a)(pi_perp(g^{-1} gamma_x g))`.
///
/// On the orbit `[gamma, gamma_x] = g u g^{-1}`, so the frame is the perp-framed
/// lift and `u = g^{-1} g_x`.
pub fn develop(path: &GrassmannPath, params: &OrbitParams) -> Result<FramedPath> {
    let gamma = path.field();
    if gamma.shape() != (params.n(), params.n()) {
        return Err(Error::DimensionMismatch("path does not match orbit parameters".into()));
    }
    let grid = gamma.grid().clone();
    let gx = gamma.ddx_asymptotic();
    let (frames, drift) = transport(params.n(), grid.len(), grid.spacing(), Side::Left, |s| {
        gamma.shifted_asymptotic(s).bracket(&gx.shifted(s))
    })?;
    let u = gx
        .conjugate_inverse(&frames)
        .map(|v| lie::ad_a(&lie::perp_part(v, params), params));
    let conj = gamma
        .values()
        .iter()
        .zip(&frames)
        .fold(0.0, |m: f64, (x, g)| m.max(lie::max_abs(&(x - g * params.a() * g.adjoint()))));
    Ok(FramedPath {
        params: params.clone(),
        gamma: gamma.clone(),
        frames,
        u,
        diagnostics: FrameDiagnostics {
            unitarity_drift: drift,
            conjugation_residual: conj,
            flagged: drift > UNITARITY_TOL || !(conj < CONJUGATION_TOL),
        },
    })
}

/// Differential of the development map: `d Phi(g v g^{-1}) = -P_u(ad(a)^{-1} v)`.
pub fn d_phi(fp: &FramedPath, delta: &MatrixField) -> Result<MatrixField> {
    let v = fp.pull_back_tangent(delta)?;
    let y = v.map(|x| lie::ad_a_inv_perp(x, &fp.params));
    Ok(symplectic::apply_p(&fp.u, &y, &fp.params)?.scale(-1.0))
}

/// `H_j = F_j(Phi(gamma))` and its gradient `g pi_perp(Q_{j+2}) g^{-1}`.
#[derive(Clone, Debug)]
pub struct PulledHamiltonian {
    pub value: f64,
    pub gradient: MatrixField,
    pub table: HierarchyTable,
}

pub fn grad_h(fp: &FramedPath, j: usize) -> Result<PulledHamiltonian> {
    let table = hierarchy::compute_hierarchy(&fp.u, &fp.params, (j + 2).max(hierarchy::DEFAULT_DEPTH))?;
    let value = table.hamiltonian(j)?;
    let gradient = table.gradient(j + 1)?.conjugate_by(&fp.frames);
    Ok(PulledHamiltonian { value, gradient, table })
}

/// `(1/2) int |gamma_x|^2` with `|x|^2 = -Re tr(x^2)`.
pub fn energy(gamma: &MatrixField) -> f64 {
    let gx = gamma.ddx_asymptotic();
    0.5 * gx.l2_pairing(&gx).expect("same grid")
}

/// Iterated covariant derivatives `nabla^k gamma_x` and the residuals of
/// `g d_x^k u g^{-1} = ad(gamma)(nabla^k gamma_x)`.
#[derive(Clone, Debug)]
pub struct CovariantChain {
    pub terms: Vec<MatrixField>,
    pub residuals: Vec<f64>,
    pub flagged: bool,
}

/// Residual threshold for [`covariant_chain`].
pub const CHAIN_TOL: f64 = 1e-6;

pub fn covariant_chain(fp: &FramedPath, kmax: usize) -> Result<CovariantChain> {
    let gamma = &fp.gamma;
    let mut terms = vec![gamma.ddx_asymptotic()];
    for k in 0..kmax {
        let d = terms[k].ddx();
        terms.push(gamma.zip_map(&d, lie::tangent_projection)?);
    }
    let mut residuals = Vec::with_capacity(kmax + 1);
    let mut du = fp.u.clone();
    for (k, eta) in terms.iter().enumerate() {
        if k > 0 {
            du = du.ddx();
        }
        let lhs = du.conjugate_by(&fp.frames);
        let rhs = gamma.bracket(eta)?;
        residuals.push(lhs.distance(&rhs)?);
    }
    let flagged = residuals.iter().any(|&r| !(r < CHAIN_TOL));
    Ok(CovariantChain { terms, residuals, flagged })
}

/// `exp(eps xi) gamma exp(-eps xi)` for a skew field `xi`.
pub fn rotate_path(path: &GrassmannPath, xi: &MatrixField, eps: f64, params: &OrbitParams) -> Result<GrassmannPath> {
    let rotated = path.field().zip_map(xi, |g, x| {
        let e = (x * C64::new(eps, 0.0)).exp();
        &e * g * e.adjoint()
    })?;
    GrassmannPath::new(rotated, params)
}

/// The tangent `[xi, gamma]` generated by [`rotate_path`].
pub fn rotation_tangent(path: &GrassmannPath, xi: &MatrixField) -> Result<MatrixField> {
    xi.bracket(path.field())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::hierarchy::offblock_field;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn soliton(g: &Grid, p: &OrbitParams) -> MatrixField {
        let q = MatrixField::from_fn(g, |x| CMat::from_element(1, 1, C64::new(sech(x), 0.0)));
        offblock_field(&q, p).unwrap()
    }

    #[test]
    fn vacuum_develops_to_zero() {
        let g = Grid::new(20.0, 64).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let fp = undevelop(&MatrixField::zeros(&g, 2, 2), &p).unwrap();
        assert!(fp.gamma().distance(&MatrixField::constant(&g, p.a())).unwrap() < 1e-15);
        let back = develop(&GrassmannPath::base(&g, &p), &p).unwrap();
        assert_eq!(back.u().max_norm(), 0.0);
    }

    #[test]
    fn constant_direction_has_exponential_frame() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let x = lie::offblock(&CMat::from_element(1, 1, C64::new(1.0, 0.0)), &p).unwrap();
        // theta = 0.8 (1 + tanh x), theta' = 0.8 sech^2 x
        let u = MatrixField::from_fn(&g, |s| &x * C64::new(0.8 * sech(s).powi(2), 0.0));
        let fp = undevelop(&u, &p).unwrap();
        for (m, s) in g.points().into_iter().enumerate() {
            let theta = 0.8 * (1.0 + s.tanh()) - 0.8 * (1.0 + (-20f64).tanh());
            let expected = (&x * C64::new(theta, 0.0)).exp();
            assert!(lie::max_abs(&(&fp.frames()[m] - expected)) < 1e-9);
        }
    }

    #[test]
    fn soliton_round_trip() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let u = soliton(&g, &p);
        let fp = undevelop(&u, &p).unwrap();
        assert!(fp.path().orbit_residual(&p) < 1e-9);
        let path = GrassmannPath::new(fp.gamma().clone(), &p).unwrap();
        let back = develop(&path, &p).unwrap();
        let err = back.u().distance(&u).unwrap();
        assert!(err < 1e-8, "round trip error {err:e}");
        assert!(back.u().par_defect(&p) < 1e-10);
        assert!(back.diagnostics().conjugation_residual < 1e-7);
        assert!(back.frame_residual().unwrap() < 1e-7);
    }

    #[test]
    fn gauge_in_centralizer_is_stripped() {
        // gamma built from f = g h with h in U(n)_a has the same development.
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(3, 1).unwrap();
        let q = MatrixField::from_fn(&g, |x| {
            CMat::from_row_slice(1, 2, &[C64::new(sech(x), 0.2 * sech(x)), C64::new(0.0, 0.5 * (-(x * x)).exp())])
        });
        let u = offblock_field(&q, &p).unwrap();
        let fp = undevelop(&u, &p).unwrap();
        let k = CMat::from_row_slice(3, 3, &[
            C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(0.0, 0.3), C64::new(0.4, 0.1),
            C64::new(0.0, 0.0), C64::new(-0.4, 0.1), C64::new(0.0, -0.2),
        ]);
        let mixed = MatrixField::new(
            g.clone(),
            fp.frames()
                .iter()
                .zip(g.points())
                .map(|(f, x)| {
                    let h = (&k * C64::new((-(x - 2.0).powi(2)).exp(), 0.0)).exp();
                    let fh = f * h;
                    &fh * p.a() * fh.adjoint()
                })
                .collect(),
        )
        .unwrap();
        let back = develop(&GrassmannPath::new(mixed, &p).unwrap(), &p).unwrap();
        assert!(back.u().distance(&u).unwrap() < 1e-8);
    }

    #[test]
    fn covariant_chain_matches_frame_derivatives() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let fp = undevelop(&soliton(&g, &p), &p).unwrap();
        let chain = covariant_chain(&fp, 2).unwrap();
        assert!(chain.residuals[0] < 1e-8, "{:?}", chain.residuals);
        assert!(chain.residuals[1] < 1e-7, "{:?}", chain.residuals);
        assert!(!chain.flagged);
    }

    #[test]
    fn path_validation() {
        let g = Grid::new(20.0, 64).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let flipped = MatrixField::constant(&g, &(-p.a()));
        match GrassmannPath::new(flipped, &p) {
            Err(Error::Validation { invariant }) => assert!(invariant.contains("left boundary base point")),
            other => panic!("unexpected {other:?}"),
        }
        let off = MatrixField::constant(&g, &(p.a() * C64::new(2.0, 0.0)));
        assert!(matches!(GrassmannPath::new(off, &p), Err(Error::Validation { .. })));
    }
}
