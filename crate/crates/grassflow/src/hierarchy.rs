//! The u(n) AKNS hierarchy: the recursion for `Q_j(u)`, the closed forms of
//! the first three terms, the Hamiltonians `F_j`, their gradients and the
//! `j`-th flow.

use crate::error::{Error, Result};
use crate::field::MatrixField;
use crate::lie::{self, CMat, OrbitParams, C64};

/// Global sign applied to `F_j` and to its gradient.
///
/// With `+1`, `F_0 = int |q|^2` and `grad F_j = pi_perp(Q_{j+1})` under the
/// pairing `<x, y> = -Re tr(xy)`; the pulled-back `H_0` is then
/// `(1/2) int |gamma_x|^2`.
pub const EPSILON: f64 = 1.0;

/// Default table depth.
pub const DEFAULT_DEPTH: usize = 6;

/// Recursion residual above which a table is flagged.
pub const RECURSION_TOL: f64 = 1e-7;

/// `Q_0, ..., Q_J` for a perp-valued field `u`.
#[derive(Clone, Debug)]
pub struct HierarchyTable {
    params: OrbitParams,
    q: Vec<MatrixField>,
    residuals: Vec<f64>,
    flagged: bool,
}

/// Builds `Q_0 = a, Q_1 = u, ...` up to `Q_depth`.
///
/// Each step takes the perp part of `Q_{j+1}` from `[Q_{j+1}, a] = (Q_j)_x + [u, Q_j]`
/// and the `u(n)_a` part from the left-anchored antiderivative of
/// `-pi_a [u, Q_{j+1}^perp]`.
pub fn compute_hierarchy(u: &MatrixField, params: &OrbitParams, depth: usize) -> Result<HierarchyTable> {
    let n = params.n();
    if u.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "field of {:?} matrices for n = {n}",
            u.shape()
        )));
    }
    let par = u.par_defect(params);
    if par > 1e-10 * u.max_norm().max(1.0) {
        return Err(Error::Domain(format!("u has a u(n)_a component of size {par:.3e}")));
    }
    let grid = u.grid();
    let mut q = vec![MatrixField::constant(grid, params.a())];
    if depth >= 1 {
        q.push(u.perp(params));
    }
    for j in 1..depth {
        let source = q[j].ddx().add(&u.bracket(&q[j])?)?;
        let perp = source.map(|s| lie::ad_a(&lie::perp_part(s, params), params));
        let par = u.bracket(&perp)?.par(params).cumint().scale(-1.0);
        q.push(perp.add(&par)?);
    }
    let mut residuals = Vec::with_capacity(depth);
    for j in 0..depth {
        let lhs = q[j].ddx().add(&u.bracket(&q[j])?)?;
        let rhs = q[j + 1].map(|x| lie::commutator(x, params.a()));
        residuals.push(lhs.distance(&rhs)?);
    }
    let flagged = residuals.iter().any(|&r| !(r < RECURSION_TOL));
    Ok(HierarchyTable { params: params.clone(), q, residuals, flagged })
}

impl HierarchyTable {
    pub fn params(&self) -> &OrbitParams {
        &self.params
    }

    /// Largest available index `J`.
    pub fn depth(&self) -> usize {
        self.q.len() - 1
    }

    pub fn u(&self) -> Result<&MatrixField> {
        self.q(1)
    }

    pub fn q(&self, j: usize) -> Result<&MatrixField> {
        self.q.get(j).ok_or(Error::Depth { needed: j, have: self.depth() })
    }

    /// `max |(Q_j)_x + [u, Q_j] - [Q_{j+1}, a]|` for `j = 0..J-1`.
    pub fn recursion_residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Set when some recursion residual exceeds [`RECURSION_TOL`].
    pub fn flagged(&self) -> bool {
        self.flagged
    }

    /// `F_j = EPSILON/(j+1) * int Re tr(Q_{j+2} a)`.
    pub fn hamiltonian(&self, j: usize) -> Result<f64> {
        let qj = self.q(j + 2)?;
        let a = self.params.a();
        let s: f64 = qj.values().iter().map(|x| lie::re_trace_product(x, a)).sum();
        Ok(EPSILON * s * qj.grid().spacing() / (j as f64 + 1.0))
    }

    /// `grad F_j = EPSILON * pi_perp(Q_{j+1})`.
    pub fn gradient(&self, j: usize) -> Result<MatrixField> {
        Ok(self.q(j + 1)?.perp(&self.params).scale(EPSILON))
    }

    /// `[Q_{j+1}, a]`, the right-hand side of the `j`-th flow.
    pub fn flow_rhs(&self, j: usize) -> Result<MatrixField> {
        let a = self.params.a().clone();
        Ok(self.q(j + 1)?.map(|x| lie::commutator(x, &a)))
    }

    /// Largest `u(n)_a` entry of `(Q_j)_x + [u, Q_j]`.
    pub fn source_par_defect(&self, j: usize) -> Result<f64> {
        let s = self.q(j)?.ddx().add(&self.u()?.bracket(self.q(j)?)?)?;
        Ok(s.par_defect(&self.params))
    }
}

/// Perp field `[[0, q], [-q^*, 0]]` from a field of `k x (n-k)` blocks.
pub fn offblock_field(q: &MatrixField, params: &OrbitParams) -> Result<MatrixField> {
    if q.shape() != params.block_shape() {
        return Err(Error::DimensionMismatch(format!(
            "block field has shape {:?}, expected {:?}",
            q.shape(),
            params.block_shape()
        )));
    }
    Ok(q.map(|b| lie::offblock(b, params).expect("shape checked")))
}

/// Field of top-right blocks.
pub fn block_field(u: &MatrixField, params: &OrbitParams) -> MatrixField {
    u.map(|x| lie::top_right(x, params))
}

/// Closed forms of `Q_1, Q_2, Q_3` in terms of the block `q`:
///
/// ```text
/// Q_2 = [[-i q q^*, i q_x], [i q_x^*, i q^* q]]
/// Q_3 = [[-q q_x^* + q_x q^*, -(q_xx + 2 q q^* q)],
///        [q_xx^* + 2 q^* q q^*, q_x^* q - q^* q_x]]
/// ```
pub fn closed_form_q(q: &MatrixField, params: &OrbitParams, j: usize) -> Result<MatrixField> {
    let u = offblock_field(q, params)?;
    let i = C64::new(0.0, 1.0);
    let qx = q.ddx();
    match j {
        1 => Ok(u),
        2 => {
            let values = q
                .values()
                .iter()
                .zip(qx.values())
                .map(|(b, bx)| {
                    let bh = b.adjoint();
                    lie::from_blocks(&(b * &bh * (-i)), &(bx * i), &(bx.adjoint() * i), &(&bh * b * i))
                })
                .collect();
            MatrixField::new(q.grid().clone(), values)
        }
        3 => {
            let qxx = q.derivative(2);
            let values = (0..q.grid().len())
                .map(|m| {
                    let (b, bx, bxx) = (q.at(m), qx.at(m), qxx.at(m));
                    let (bh, bxh) = (b.adjoint(), bx.adjoint());
                    let tr: CMat = -(bxx + b * &bh * b * C64::new(2.0, 0.0));
                    let tl = -(b * &bxh) + bx * &bh;
                    let br = &bxh * b - &bh * bx;
                    lie::from_blocks(&tl, &tr, &(-tr.adjoint()), &br)
                })
                .collect();
            MatrixField::new(q.grid().clone(), values)
        }
        _ => Err(Error::Parameter(format!("closed forms exist for j in 1..=3, got {j}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    fn scalar_block(g: &Grid, f: impl Fn(f64) -> C64) -> MatrixField {
        MatrixField::from_fn(g, |x| CMat::from_element(1, 1, f(x)))
    }

    #[test]
    fn vacuum_table_is_trivial() {
        let g = Grid::new(20.0, 64).unwrap();
        let p = OrbitParams::new(3, 1).unwrap();
        let t = compute_hierarchy(&MatrixField::zeros(&g, 3, 3), &p, 6).unwrap();
        assert!(t.q(0).unwrap().distance(&MatrixField::constant(&g, p.a())).unwrap() == 0.0);
        for j in 1..=6 {
            assert_eq!(t.q(j).unwrap().max_norm(), 0.0);
        }
        for j in 0..4 {
            assert_eq!(t.hamiltonian(j).unwrap(), 0.0);
        }
    }

    #[test]
    fn closed_form_q2_for_sech() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let q = scalar_block(&g, |x| C64::new(sech(x), 0.0));
        let q2 = closed_form_q(&q, &p, 2).unwrap();
        for (m, x) in g.points().into_iter().enumerate() {
            let v = q2.at(m);
            assert!((v[(0, 0)] - C64::new(0.0, -sech(x).powi(2))).norm() < 1e-12);
            let tol = if x.abs() <= 10.0 { 1e-10 } else { 1e-8 };
            assert!((v[(0, 1)] - C64::new(0.0, -sech(x) * x.tanh())).norm() < tol);
        }
        assert_eq!(closed_form_q(&q, &p, 1).unwrap(), offblock_field(&q, &p).unwrap());
        let zero = closed_form_q(&q.scale(0.0), &p, 3).unwrap();
        assert_eq!(zero.max_norm(), 0.0);
    }

    #[test]
    fn table_matches_closed_forms_with_complex_block() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(3, 1).unwrap();
        let q = MatrixField::from_fn(&g, |x| {
            CMat::from_row_slice(1, 2, &[
                C64::new(0.8 * (-(x - 1.0).powi(2) / 2.0).exp(), 0.3 * (-(x * x) / 3.0).exp()),
                C64::new(0.0, 0.5) * sech(x + 2.0),
            ])
        });
        let u = offblock_field(&q, &p).unwrap();
        let t = compute_hierarchy(&u, &p, 4).unwrap();
        for j in 2..=3 {
            let err = t.q(j).unwrap().distance(&closed_form_q(&q, &p, j).unwrap()).unwrap();
            assert!(err < 1e-9, "Q_{j}: {err:e}");
        }
        assert!(!t.flagged());
        for j in 1..4 {
            assert!(t.source_par_defect(j).unwrap() < 1e-8);
        }
    }

    #[test]
    fn hamiltonians_of_sech() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let q = scalar_block(&g, |x| C64::new(sech(x), 0.0));
        let t = compute_hierarchy(&offblock_field(&q, &p).unwrap(), &p, 5).unwrap();
        assert!((t.hamiltonian(0).unwrap() - 2.0).abs() < 1e-8);
        assert!(t.hamiltonian(1).unwrap().abs() < 1e-10);
        // int |q_x|^2 - |q|^4 = 2/3 - 4/3
        assert!((t.hamiltonian(2).unwrap() + 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn flows_one_and_two() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let q = scalar_block(&g, |x| C64::new(sech(x), 0.4 * sech(x) * (0.7 * x).sin()));
        let u = offblock_field(&q, &p).unwrap();
        let t = compute_hierarchy(&u, &p, 4).unwrap();
        // translation flow
        assert!(t.flow_rhs(1).unwrap().distance(&u.ddx()).unwrap() < 1e-10);
        // matrix NLS in the top-right block
        let rhs = block_field(&t.flow_rhs(2).unwrap(), &p);
        let qxx = q.derivative(2);
        let mnls = MatrixField::new(
            g.clone(),
            (0..g.len())
                .map(|m| {
                    let b = q.at(m);
                    (qxx.at(m) + b * b.adjoint() * b * C64::new(2.0, 0.0)) * C64::new(0.0, 1.0)
                })
                .collect(),
        )
        .unwrap();
        assert!(rhs.distance(&mnls).unwrap() < 1e-9);
        // gradient top-right block for j = 2
        let grad = block_field(&t.gradient(2).unwrap(), &p);
        assert!(grad.distance(&mnls.map(|x| x * C64::new(0.0, 1.0))).unwrap() < 1e-9);
    }

    #[test]
    fn depth_errors() {
        let g = Grid::new(20.0, 64).unwrap();
        let p = OrbitParams::new(2, 1).unwrap();
        let t = compute_hierarchy(&MatrixField::zeros(&g, 2, 2), &p, 2).unwrap();
        assert!(matches!(t.hamiltonian(1), Err(Error::Depth { .. })));
        assert!(t.gradient(1).is_ok());
    }
}
