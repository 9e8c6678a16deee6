//! Finite-dimensional u(n) algebra around the base point
//! `a = diag((i/2) I_k, -(i/2) I_{n-k})`.
//!
//! Matrices are dense `DMatrix<Complex64>`. The block split is the one induced
//! by `a`: the centralizer `u(n)_a` (block-diagonal) and its orthogonal
//! complement (off-block).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Absolute tolerance used when accepting a matrix as skew-Hermitian.
pub const SKEW_TOL: f64 = 1e-12;

/// Grassmannian orbit data: sizes `n`, `k` and the base point `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitParams {
    n: usize,
    k: usize,
    a: CMat,
}

impl OrbitParams {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 || k < 1 || k >= n {
            return Err(Error::Parameter(format!(
                "need 1 <= k < n, got n = {n}, k = {k}"
            )));
        }
        let a = CMat::from_fn(n, n, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if i < k {
                C64::new(0.0, 0.5)
            } else {
                C64::new(0.0, -0.5)
            }
        });
        Ok(Self { n, k, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The base point `a`.
    pub fn a(&self) -> &CMat {
        &self.a
    }

    /// Shape of the off-diagonal block `q` of a perp element.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.k, self.n - self.k)
    }

    /// Real dimension of `u(n)_a^perp`.
    pub fn perp_dim(&self) -> usize {
        2 * self.k * (self.n - self.k)
    }

    #[inline]
    pub fn is_par_entry(&self, i: usize, j: usize) -> bool {
        (i < self.k) == (j < self.k)
    }

    fn check_dim(&self, x: &CMat) -> Result<()> {
        if x.nrows() != self.n || x.ncols() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "expected {}x{} matrix, got {}x{}",
                self.n,
                self.n,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }
}

/// Constructs the base point for `(n, k)`.
pub fn make_base_point(n: usize, k: usize) -> Result<OrbitParams> {
    OrbitParams::new(n, k)
}

/// Element of u(n), symmetrized on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix(CMat);

impl SkewMatrix {
    /// Accepts `m` when `max |m + m^*| <= SKEW_TOL * max(1, max|m|)` and returns
    /// its projection `(m - m^*)/2`.
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "skew matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = skew_defect(&m);
        if defect > SKEW_TOL * max_abs(&m).max(1.0) {
            return Err(Error::Domain(format!(
                "matrix is not skew-Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(Self(skew_part(&m)))
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }
}

/// Split of `x` into its `u(n)_a` and `u(n)_a^perp` parts.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSplit {
    pub par: CMat,
    pub perp: CMat,
}

pub fn project(x: &CMat, p: &OrbitParams) -> Result<BlockSplit> {
    p.check_dim(x)?;
    Ok(BlockSplit {
        par: par_part(x, p),
        perp: perp_part(x, p),
    })
}

/// Block-diagonal part.
pub fn par_part(x: &CMat, p: &OrbitParams) -> CMat {
    CMat::from_fn(x.nrows(), x.ncols(), |i, j| {
        if p.is_par_entry(i, j) {
            x[(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Off-block part.
pub fn perp_part(x: &CMat, p: &OrbitParams) -> CMat {
    CMat::from_fn(x.nrows(), x.ncols(), |i, j| {
        if p.is_par_entry(i, j) {
            C64::new(0.0, 0.0)
        } else {
            x[(i, j)]
        }
    })
}

/// `-Re tr(xy)`.
pub fn inner(x: &CMat, y: &CMat) -> Result<f64> {
    if x.shape() != y.shape() || !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "inner product of {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(pairing(x, y))
}

/// `-Re tr(xy)` without the shape check.
#[inline]
pub fn pairing(x: &CMat, y: &CMat) -> f64 {
    let n = x.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (x[(i, j)] * y[(j, i)]).re;
        }
    }
    -s
}

/// `Re tr(xy)`.
#[inline]
pub fn re_trace_product(x: &CMat, y: &CMat) -> f64 {
    -pairing(x, y)
}

pub fn ad(x: &CMat, y: &CMat) -> Result<CMat> {
    if x.shape() != y.shape() || !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "commutator of {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(commutator(x, y))
}

#[inline]
pub fn commutator(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

/// `[a, v]`, computed entrywise: `(a_i - a_j) v_ij`.
pub fn ad_a(v: &CMat, p: &OrbitParams) -> CMat {
    CMat::from_fn(v.nrows(), v.ncols(), |i, j| {
        let ai = if i < p.k { 0.5 } else { -0.5 };
        let aj = if j < p.k { 0.5 } else { -0.5 };
        v[(i, j)] * C64::new(0.0, ai - aj)
    })
}

/// Inverse of `ad(a)` on `u(n)_a^perp`, which equals `-ad(a)` there.
pub fn ad_a_inv(v: &CMat, p: &OrbitParams) -> Result<CMat> {
    p.check_dim(v)?;
    let par = max_abs(&par_part(v, p));
    if par > 1e-10 * max_abs(v).max(1.0) {
        return Err(Error::Domain(format!(
            "ad(a)^-1 applied to a field with u(n)_a component of size {par:.3e}"
        )));
    }
    Ok(-ad_a(v, p))
}

/// `-ad(a)` applied to the perp part of `v`. Internal helper for callers that
/// know `v` is perp up to round-off.
#[inline]
pub(crate) fn ad_a_inv_perp(v: &CMat, p: &OrbitParams) -> CMat {
    -ad_a(&perp_part(v, p), p)
}

/// Zero exactly on the adjoint orbit of `a`: `|x^2 + I/4|_F + |tr(-i x) - (2k-n)/2|`.
pub fn orbit_residual(x: &CMat, p: &OrbitParams) -> f64 {
    let n = p.n;
    let sq = x * x + CMat::identity(n, n) * C64::new(0.25, 0.0);
    let tr = x.trace() * C64::new(0.0, -1.0);
    let target = (2.0 * p.k as f64 - n as f64) / 2.0;
    sq.norm() + (tr - C64::new(target, 0.0)).norm()
}

/// Tangent projection at an orbit point: `pi_t(w) = -ad(gamma)^2 w`.
pub fn tangent_projection(gamma: &CMat, w: &CMat) -> CMat {
    -commutator(gamma, &commutator(gamma, w))
}

/// `[[0, q], [-q^*, 0]]` for a `k x (n-k)` block `q`.
pub fn offblock(q: &CMat, p: &OrbitParams) -> Result<CMat> {
    let (r, c) = p.block_shape();
    if q.shape() != (r, c) {
        return Err(Error::DimensionMismatch(format!(
            "off-block entry must be {r}x{c}, got {:?}",
            q.shape()
        )));
    }
    let mut u = CMat::zeros(p.n, p.n);
    for i in 0..r {
        for j in 0..c {
            u[(i, r + j)] = q[(i, j)];
            u[(r + j, i)] = -q[(i, j)].conj();
        }
    }
    Ok(u)
}

/// Top-right `k x (n-k)` block.
pub fn top_right(x: &CMat, p: &OrbitParams) -> CMat {
    let (r, c) = p.block_shape();
    x.view((0, r), (r, c)).into_owned()
}

/// Assembles a matrix from its four blocks.
pub fn from_blocks(tl: &CMat, tr: &CMat, bl: &CMat, br: &CMat) -> CMat {
    let (k, m) = (tl.nrows(), br.nrows());
    let mut x = CMat::zeros(k + m, k + m);
    x.view_mut((0, 0), (k, k)).copy_from(tl);
    x.view_mut((0, k), (k, m)).copy_from(tr);
    x.view_mut((k, 0), (m, k)).copy_from(bl);
    x.view_mut((k, k), (m, m)).copy_from(br);
    x
}

/// Largest entry modulus.
pub fn max_abs(x: &CMat) -> f64 {
    x.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `max |x + x^*|`.
pub fn skew_defect(x: &CMat) -> f64 {
    max_abs(&(x + x.adjoint()))
}

/// `(x - x^*)/2`.
pub fn skew_part(x: &CMat) -> CMat {
    (x - x.adjoint()) * C64::new(0.5, 0.0)
}

/// `max |g^* g - I|`.
pub fn unitarity_defect(g: &CMat) -> f64 {
    let n = g.nrows();
    max_abs(&(g.adjoint() * g - CMat::identity(n, n)))
}

/// Unitary polar factor of `g`.
pub fn reunitarize(g: &CMat) -> CMat {
    let svd = g.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => g.clone(),
    }
}

/// Nearest orbit point via the matrix sign of the Hermitian matrix `-2 i x`:
/// `x -> (i/2) sign(-2 i x)`. Newton-Schulz iteration, valid near the orbit.
pub fn project_to_orbit(x: &CMat) -> CMat {
    let n = x.nrows();
    let herm = {
        let h = x * C64::new(0.0, -2.0);
        (&h + h.adjoint()) * C64::new(0.5, 0.0)
    };
    let eye = CMat::identity(n, n);
    let mut s = herm;
    for _ in 0..60 {
        let s2 = &s * &s;
        let next = &s * (&eye * C64::new(3.0, 0.0) - &s2) * C64::new(0.5, 0.0);
        let step = max_abs(&(&next - &s));
        s = next;
        if step < 1e-15 {
            break;
        }
    }
    s * C64::new(0.0, 0.5)
}
