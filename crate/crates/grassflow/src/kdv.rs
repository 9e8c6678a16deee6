//! KdV Lax fields, the reality pattern of sl(2) Laurent coefficients, and the
//! two recursion operators.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{MatrixField, ScalarField};
use crate::lie::{CMat, C64};

/// Imaginary parts below this count as real.
pub const REAL_TOL: f64 = 1e-12;

fn real_field(q: &ScalarField) -> Vec<C64> {
    q.values().iter().map(|&v| C64::new(v, 0.0)).collect()
}

fn zero_entries(len: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); len]
}

/// `diag(1, -1)`.
pub fn a2() -> CMat {
    CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)])
}

/// Fields of the 2x2 KdV Lax pair `[d_x + a l + u, d_t + a l^3 + u l^2 + Q_2 l + Q_3]`.
#[derive(Clone, Debug)]
pub struct KdVLaxFields {
    pub a2: CMat,
    pub u2: MatrixField,
    pub q2: MatrixField,
    pub q3: MatrixField,
}

impl KdVLaxFields {
    /// `a l^3 + u l^2 + Q_2 l + Q_3` at grid point `m`.
    pub fn laurent_at(&self, m: usize) -> LaurentCoeffs {
        LaurentCoeffs::from_iter([
            (3, self.a2.clone()),
            (2, self.u2.at(m).clone()),
            (1, self.q2.at(m).clone()),
            (0, self.q3.at(m).clone()),
        ])
    }
}

pub fn kdv_lax_fields(q: &ScalarField) -> KdVLaxFields {
    let grid = q.grid();
    let len = grid.len();
    let qx = q.ddx();
    let qxx = q.derivative(2);
    let c = |f: &ScalarField, s: f64| -> Vec<C64> { f.values().iter().map(|&v| C64::new(s * v, 0.0)).collect() };
    let u2 = MatrixField::from_entries(grid, 2, 2, |i, j| match (i, j) {
        (0, 1) => real_field(q),
        (1, 0) => vec![C64::new(1.0, 0.0); len],
        _ => zero_entries(len),
    });
    let q2 = MatrixField::from_entries(grid, 2, 2, |i, j| match (i, j) {
        (0, 0) => c(q, -0.5),
        (0, 1) => c(&qx, -0.5),
        (1, 1) => c(q, 0.5),
        _ => zero_entries(len),
    });
    let q3_top = qxx.zip_map(q, |d2, v| 0.25 * (d2 - 2.0 * v * v)).expect("same grid");
    let q3 = MatrixField::from_entries(grid, 2, 2, |i, j| match (i, j) {
        (0, 0) => c(&qx, 0.25),
        (0, 1) => real_field(&q3_top),
        (1, 0) => c(q, -0.5),
        _ => c(&qx, -0.25),
    });
    KdVLaxFields { a2: a2(), u2, q2, q3 }
}

/// `(q_xxx - 6 q q_x)/4`.
pub fn kdv_rhs(q: &ScalarField) -> Result<ScalarField> {
    let qx = q.ddx();
    let qxxx = q.derivative(3);
    let nonlin = q.mul(&qx)?;
    qxxx.zip_map(&nonlin, |a, b| 0.25 * (a - 6.0 * b))
}

/// `[int q, int q^2, int (q^3 + q_x^2/2)]`, conserved by the KdV flow.
pub fn kdv_invariants(q: &ScalarField) -> [f64; 3] {
    let qx = q.ddx();
    let third = q.zip_map(&qx, |v, d| v * v * v + 0.5 * d * d).expect("same grid");
    [q.integrate(), q.map(|v| v * v).integrate(), third.integrate()]
}

/// Finitely supported Laurent polynomial `sum_j xi_j l^j` in sl(2).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaurentCoeffs {
    pub coeffs: BTreeMap<i32, CMat>,
}

impl FromIterator<(i32, CMat)> for LaurentCoeffs {
    fn from_iter<T: IntoIterator<Item = (i32, CMat)>>(iter: T) -> Self {
        LaurentCoeffs { coeffs: iter.into_iter().collect() }
    }
}

impl LaurentCoeffs {
    fn get(&self, j: i32) -> CMat {
        self.coeffs.get(&j).cloned().unwrap_or_else(|| CMat::zeros(2, 2))
    }
}

/// Max over `j` of `|xi_{2j+1} - [[C_{2j}, -2 A_{2j}], [0, -C_{2j}]]|`, with
/// `A`, `C` read from `xi_{2j}`.
pub fn reality_residual(c: &LaurentCoeffs) -> Result<f64> {
    for (j, m) in &c.coeffs {
        if m.shape() != (2, 2) {
            return Err(Error::DimensionMismatch(format!("coefficient {j} is {:?}, expected 2x2", m.shape())));
        }
        if m.iter().any(|z| z.im.abs() > REAL_TOL) {
            return Err(Error::Domain(format!("coefficient {j} has complex entries")));
        }
    }
    let (Some(&lo), Some(&hi)) = (c.coeffs.keys().next(), c.coeffs.keys().next_back()) else {
        return Ok(0.0);
    };
    let mut even = lo - 1 - (lo - 1).rem_euclid(2);
    let mut worst: f64 = 0.0;
    while even <= hi {
        let xi = c.get(even);
        let (a, cc) = (xi[(0, 0)].re, xi[(1, 0)].re);
        let want = CMat::from_row_slice(
            2,
            2,
            &[C64::new(cc, 0.0), C64::new(-2.0 * a, 0.0), C64::new(0.0, 0.0), C64::new(-cc, 0.0)],
        );
        let got = c.get(even + 1);
        worst = worst.max((got - want).iter().fold(0.0, |m: f64, z| m.max(z.norm())));
        even += 2;
    }
    Ok(worst)
}

/// `sum_i tr(xi_i eta_{k-1-i})`.
pub fn lambda_pairing(xi: &LaurentCoeffs, eta: &LaurentCoeffs, k: i32) -> f64 {
    xi.coeffs
        .iter()
        .map(|(&i, x)| (x * eta.get(k - 1 - i)).trace().re)
        .sum()
}

/// `-2 v_x`.
pub fn j_minus1(v: &ScalarField) -> ScalarField {
    v.ddx().scale(-2.0)
}

/// `v_xxx/2 - 2 q v_x - q_x v`.
pub fn j_1(q: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    let vx = v.ddx();
    let vxxx = v.derivative(3);
    let qx = q.ddx();
    if v.grid() != q.grid() {
        return Err(Error::DimensionMismatch("q and v live on different grids".into()));
    }
    let mut out = Vec::with_capacity(q.grid().len());
    for m in 0..q.grid().len() {
        out.push(0.5 * vxxx.values()[m] - 2.0 * q.values()[m] * vx.values()[m] - qx.values()[m] * v.values()[m]);
    }
    ScalarField::new(q.grid().clone(), out)
}

/// Residuals of the recursion operators re-derived from their first-order systems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivationReport {
    /// `|delta q - J_{-1}(C_{-2})|` from the negative chain.
    pub minus1: f64,
    /// Residual of the negative chain's matrix equations and reality pattern.
    pub minus1_chain: f64,
    /// `|delta q - J_1(C)|` from the zeroth-order system.
    pub plus1: f64,
    /// Residual of `delta q e_12 = [xi_0, d_x + e_21 + q e_12]`.
    pub plus1_chain: f64,
}

impl DerivationReport {
    pub fn max(&self) -> f64 {
        self.minus1.max(self.minus1_chain).max(self.plus1).max(self.plus1_chain)
    }
}

fn sl2_field(a: &ScalarField, b: &ScalarField, c: &ScalarField) -> MatrixField {
    MatrixField::from_entries(a.grid(), 2, 2, |i, j| match (i, j) {
        (0, 0) => real_field(a),
        (0, 1) => real_field(b),
        (1, 0) => real_field(c),
        _ => real_field(&a.scale(-1.0)),
    })
}

fn e12_field(f: &ScalarField) -> MatrixField {
    let z = ScalarField::zeros(f.grid());
    sl2_field(&z, f, &z)
}

/// Re-derives `J_{-1}` and `J_1` with `c` in the role of `C_{-2}` and `C`.
pub fn derivation_residuals(q: &ScalarField, c: &ScalarField) -> Result<DerivationReport> {
    if q.grid() != c.grid() {
        return Err(Error::DimensionMismatch("q and C live on different grids".into()));
    }
    let grid = q.grid();
    let zero = ScalarField::zeros(grid);
    let a = MatrixField::constant(grid, &a2());
    // d_x + e_21 + q e_12, without the d_x
    let lax = sl2_field(&zero, q, &ScalarField::from_fn(grid, |_| 1.0));
    let comm_l = |xi: &MatrixField| -> Result<MatrixField> { xi.ddx().add(&lax.bracket(xi)?) };

    // negative chain: xi_{-1} = [[A, B], [0, -A]], xi_{-2} = [[A2, B2], [C2, -A2]]
    let a1 = c.clone();
    let b1 = a1.ddx();
    let dq_minus = b1.scale(-2.0);
    let b2 = b1.ddx().sub(&q.mul(&a1)?.scale(2.0))?.scale(-0.5);
    let a2f = b2.sub(&q.mul(c)?)?.cumint();
    let xi1 = sl2_field(&a1, &b1, &zero);
    let xi2 = sl2_field(&a2f, &b2, c);
    let eq1 = xi1.bracket(&a)?.sub(&e12_field(&dq_minus))?.max_norm();
    let eq2 = comm_l(&xi1)?.sub(&xi2.bracket(&a)?)?.max_norm();
    let mut pattern: f64 = 0.0;
    for m in 0..grid.len() {
        let lc = LaurentCoeffs::from_iter([(-1, xi1.at(m).clone()), (-2, xi2.at(m).clone())]);
        pattern = pattern.max(reality_residual(&lc)?);
    }
    let minus1 = dq_minus.distance(&j_minus1(c))?;

    // zeroth-order system: A = -C_x/2, B = A_x + q C, delta q = 2 q A - B_x
    let a0 = c.ddx().scale(-0.5);
    let b0 = a0.ddx().add(&q.mul(c)?)?;
    let dq_plus = q.mul(&a0)?.scale(2.0).sub(&b0.ddx())?;
    let xi0 = sl2_field(&a0, &b0, c);
    let plus1_chain = e12_field(&dq_plus).add(&comm_l(&xi0)?)?.max_norm();
    let plus1 = dq_plus.distance(&j_1(q, c)?)?;

    Ok(DerivationReport { minus1, minus1_chain: eq1.max(eq2).max(pattern), plus1, plus1_chain })
}
