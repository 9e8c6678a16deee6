//! Periodic grid on `[-L, L)` and spectral calculus for matrix and scalar
//! fields sampled on it.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::lie::{self, CMat, OrbitParams, C64};

struct GridInner {
    half_width: f64,
    len: usize,
    /// Wavenumbers with the Nyquist mode set to zero.
    k: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid `x_m = -L + m h`, `h = 2L/N`.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("L", &self.inner.half_width)
            .field("N", &self.inner.len)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.half_width == other.inner.half_width && self.inner.len == other.inner.len
    }
}

impl Grid {
    pub fn new(half_width: f64, len: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Parameter(format!("half-width must be positive, got {half_width}")));
        }
        if len < 8 || !len.is_multiple_of(2) {
            return Err(Error::Parameter(format!("grid size must be even and >= 8, got {len}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let dk = std::f64::consts::PI / half_width;
        let k = (0..len)
            .map(|m| {
                if m < len / 2 {
                    dk * m as f64
                } else if m == len / 2 {
                    0.0
                } else {
                    dk * (m as f64 - len as f64)
                }
            })
            .collect();
        Ok(Self {
            inner: Arc::new(GridInner { half_width, len, k, fwd, inv }),
        })
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.inner.half_width / self.inner.len as f64
    }

    pub fn point(&self, m: usize) -> f64 {
        -self.inner.half_width + m as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|m| self.point(m)).collect()
    }

    /// Number of points at each end inspected by the decay diagnostics.
    pub fn decay_band(&self) -> usize {
        self.len().div_ceil(100).max(1)
    }

    fn forward(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.inner.fwd.process(&mut buf);
        buf
    }

    fn inverse(&self, mut buf: Vec<C64>) -> Vec<C64> {
        self.inner.inv.process(&mut buf);
        let s = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|z| *z *= s);
        buf
    }

    /// Spectral derivative of the given order.
    pub fn derivative(&self, f: &[C64], order: u32) -> Vec<C64> {
        if order == 0 {
            return f.to_vec();
        }
        let mut fh = self.forward(f);
        for (z, &k) in fh.iter_mut().zip(&self.inner.k) {
            *z *= C64::new(0.0, k).powu(order);
        }
        self.inverse(fh)
    }

    /// Band-limited interpolant evaluated at `x_m + s`.
    pub fn shifted(&self, f: &[C64], s: f64) -> Vec<C64> {
        if s == 0.0 {
            return f.to_vec();
        }
        let mut fh = self.forward(f);
        for (m, (z, &k)) in fh.iter_mut().zip(&self.inner.k).enumerate() {
            if m == self.len() / 2 {
                *z = C64::new(0.0, 0.0);
            } else {
                *z *= C64::new(0.0, k * s).exp();
            }
        }
        self.inverse(fh)
    }

    /// Antiderivative anchored at the left end, `F(x_0) = 0`.
    ///
    /// The mean is integrated exactly as a linear ramp and the remainder
    /// spectrally, so `ddx(cumint f) = f - mean(f)`.
    pub fn cumint(&self, f: &[C64]) -> Vec<C64> {
        let n = self.len();
        let mean = f.iter().sum::<C64>() / n as f64;
        let centred: Vec<C64> = f.iter().map(|z| z - mean).collect();
        let mut fh = self.forward(&centred);
        for (z, &k) in fh.iter_mut().zip(&self.inner.k) {
            if k == 0.0 {
                *z = C64::new(0.0, 0.0);
            } else {
                *z /= C64::new(0.0, k);
            }
        }
        let g = self.inverse(fh);
        let g0 = g[0];
        let h = self.spacing();
        g.iter()
            .enumerate()
            .map(|(m, z)| z - g0 + mean * (m as f64 * h))
            .collect()
    }

    /// Periodic trapezoid, `h * sum f`.
    pub fn integrate(&self, f: &[C64]) -> C64 {
        f.iter().sum::<C64>() * self.spacing()
    }

    fn step_width(&self) -> f64 {
        (self.half_width() / 20.0).max(4.0 * self.spacing())
    }

    /// Smooth step `S(x) = (1 + tanh(x/w))/2` and its derivative, used to
    /// remove the jump of fields with distinct limits at both ends.
    fn step_at(&self, x: f64) -> (f64, f64) {
        let w = self.step_width();
        let t = (x / w).tanh();
        (0.5 * (1.0 + t), 0.5 * (1.0 - t * t) / w)
    }
}

fn is_zero(f: &[C64]) -> bool {
    f.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// Grid-sampled matrix field. Used for skew fields (`u`, `Q_j`, variations),
/// orbit paths and tangent fields alike.
#[derive(Clone, Debug)]
pub struct MatrixField {
    grid: Grid,
    rows: usize,
    cols: usize,
    values: Vec<CMat>,
}

/// Skew-Hermitian valued field.
pub type SkewField = MatrixField;

impl PartialEq for MatrixField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl MatrixField {
    pub fn new(grid: Grid, values: Vec<CMat>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        let (rows, cols) = values[0].shape();
        if values.iter().any(|v| v.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch("field samples differ in shape".into()));
        }
        Ok(Self { grid, rows, cols, values })
    }

    pub fn zeros(grid: &Grid, rows: usize, cols: usize) -> Self {
        Self::constant(grid, &CMat::zeros(rows, cols))
    }

    pub fn constant(grid: &Grid, m: &CMat) -> Self {
        Self {
            grid: grid.clone(),
            rows: m.nrows(),
            cols: m.ncols(),
            values: vec![m.clone(); grid.len()],
        }
    }

    /// Samples `f(x_m)`.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64) -> CMat) -> Self {
        let values: Vec<CMat> = grid.points().into_iter().map(&mut f).collect();
        let (rows, cols) = values[0].shape();
        Self { grid: grid.clone(), rows, cols, values }
    }

    /// Builds a field from per-entry series.
    pub fn from_entries(grid: &Grid, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Vec<C64>) -> Self {
        let mut values = vec![CMat::zeros(rows, cols); grid.len()];
        for i in 0..rows {
            for j in 0..cols {
                let s = f(i, j);
                for (v, z) in values.iter_mut().zip(s) {
                    v[(i, j)] = z;
                }
            }
        }
        Self { grid: grid.clone(), rows, cols, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn into_values(self) -> Vec<CMat> {
        self.values
    }

    pub fn at(&self, m: usize) -> &CMat {
        &self.values[m]
    }

    pub fn first(&self) -> &CMat {
        &self.values[0]
    }

    pub fn last(&self) -> &CMat {
        &self.values[self.values.len() - 1]
    }

    /// Time series of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Vec<C64> {
        self.values.iter().map(|v| v[(i, j)]).collect()
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        let values: Vec<CMat> = self.values.iter().map(f).collect();
        let (rows, cols) = values[0].shape();
        Self { grid: self.grid.clone(), rows, cols, values }
    }

    pub fn map_indexed(&self, f: impl Fn(usize, &CMat) -> CMat) -> Self {
        let values: Vec<CMat> = self.values.iter().enumerate().map(|(m, v)| f(m, v)).collect();
        let (rows, cols) = values[0].shape();
        Self { grid: self.grid.clone(), rows, cols, values }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "fields differ: {:?} {:?} vs {:?} {:?}",
                self.grid,
                self.shape(),
                other.grid,
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("fields live on different grids".into()));
        }
        let values: Vec<CMat> = self.values.iter().zip(&other.values).map(|(x, y)| f(x, y)).collect();
        let (rows, cols) = values[0].shape();
        Ok(Self { grid: self.grid.clone(), rows, cols, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        self.zip_map(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        self.zip_map(other, |x, y| x - y)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let s = C64::new(s, 0.0);
        self.zip_map(other, |x, y| x + y * s)
    }

    pub fn scale(&self, s: f64) -> Self {
        let s = C64::new(s, 0.0);
        self.map(|x| x * s)
    }

    /// Pointwise `[self, other]`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        self.zip_map(other, lie::commutator)
    }

    fn map_series(&self, f: impl Fn(&[C64]) -> Vec<C64>) -> Self {
        Self::from_entries(&self.grid, self.rows, self.cols, |i, j| {
            let s = self.entry(i, j);
            if is_zero(&s) {
                s
            } else {
                f(&s)
            }
        })
    }

    /// Spectral derivative, periodic convention.
    pub fn ddx(&self) -> Self {
        self.derivative(1)
    }

    pub fn derivative(&self, order: u32) -> Self {
        self.map_series(|s| self.grid.derivative(s, order))
    }

    /// Derivative of a field with distinct constant limits at the two ends.
    ///
    /// The jump `f(x_{N-1}) - f(x_0)` is carried by a smooth step whose
    /// derivative is added back analytically; the remainder is periodic.
    pub fn ddx_asymptotic(&self) -> Self {
        let grid = &self.grid;
        let (left, jump) = (self.first().clone(), self.last() - self.first());
        let steps: Vec<(f64, f64)> = grid.points().into_iter().map(|x| grid.step_at(x)).collect();
        let rem = self.map_indexed(|m, v| v - &left - &jump * C64::new(steps[m].0, 0.0));
        rem.ddx().map_indexed(|m, v| v + &jump * C64::new(steps[m].1, 0.0))
    }

    /// Band-limited values at `x_m + s`.
    pub fn shifted(&self, s: f64) -> Self {
        self.map_series(|f| self.grid.shifted(f, s))
    }

    /// Shift for fields with distinct limits at the two ends.
    pub fn shifted_asymptotic(&self, s: f64) -> Self {
        let grid = &self.grid;
        let (left, jump) = (self.first().clone(), self.last() - self.first());
        let points = grid.points();
        let rem = self.map_indexed(|m, v| v - &left - &jump * C64::new(grid.step_at(points[m]).0, 0.0));
        rem.shifted(s)
            .map_indexed(|m, v| v + &left + &jump * C64::new(grid.step_at(points[m] + s).0, 0.0))
    }

    /// Left-anchored antiderivative.
    pub fn cumint(&self) -> Self {
        self.map_series(|s| self.grid.cumint(s))
    }

    /// `h * sum` of the samples.
    pub fn integrate(&self) -> CMat {
        let mut acc = CMat::zeros(self.rows, self.cols);
        for v in &self.values {
            acc += v;
        }
        acc * C64::new(self.grid.spacing(), 0.0)
    }

    /// Largest entry modulus over the outer band of points at each end.
    pub fn boundary_decay(&self) -> f64 {
        let b = self.grid.decay_band();
        let n = self.values.len();
        self.values[..b]
            .iter()
            .chain(&self.values[n - b..])
            .fold(0.0, |m, v| m.max(lie::max_abs(v)))
    }

    /// Largest entry modulus over the whole grid.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(lie::max_abs(v)))
    }

    /// `max_norm(self - other)`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_norm())
    }

    /// `int <self, other> dx` with `<x, y> = -Re tr(xy)`.
    pub fn l2_pairing(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(x, y)| lie::pairing(x, y)).sum();
        Ok(s * self.grid.spacing())
    }

    /// `h * sum |f|_F`.
    pub fn l1_frobenius(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() * self.grid.spacing()
    }

    /// Pointwise `g f g^*`.
    pub fn conjugate_by(&self, frames: &[CMat]) -> Self {
        self.map_indexed(|m, v| &frames[m] * v * frames[m].adjoint())
    }

    /// Pointwise `g^* f g`.
    pub fn conjugate_inverse(&self, frames: &[CMat]) -> Self {
        self.map_indexed(|m, v| frames[m].adjoint() * v * &frames[m])
    }

    pub fn par(&self, p: &OrbitParams) -> Self {
        self.map(|v| lie::par_part(v, p))
    }

    pub fn perp(&self, p: &OrbitParams) -> Self {
        self.map(|v| lie::perp_part(v, p))
    }

    /// Largest `|f + f^*|` over the grid.
    pub fn skew_defect(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(lie::skew_defect(v)))
    }

    /// Largest `u(n)_a` entry over the grid.
    pub fn par_defect(&self, p: &OrbitParams) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(lie::max_abs(&lie::par_part(v, p))))
    }
}

/// Grid-sampled real field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("scalar field has non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: grid.clone(), values: grid.points().into_iter().map(f).collect() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn complex(&self) -> Vec<C64> {
        self.values.iter().map(|&v| C64::new(v, 0.0)).collect()
    }

    fn with_real_part(&self, z: Vec<C64>) -> Self {
        Self { grid: self.grid.clone(), values: z.into_iter().map(|z| z.re).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("fields live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn ddx(&self) -> Self {
        self.derivative(1)
    }

    pub fn derivative(&self, order: u32) -> Self {
        self.with_real_part(self.grid.derivative(&self.complex(), order))
    }

    pub fn shifted(&self, s: f64) -> Self {
        self.with_real_part(self.grid.shifted(&self.complex(), s))
    }

    pub fn cumint(&self) -> Self {
        self.with_real_part(self.grid.cumint(&self.complex()))
    }

    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// `int self * other dx`.
    pub fn l2_pairing(&self, other: &Self) -> Result<f64> {
        Ok(self.mul(other)?.integrate())
    }

    pub fn boundary_decay(&self) -> f64 {
        let b = self.grid.decay_band();
        let n = self.values.len();
        self.values[..b].iter().chain(&self.values[n - b..]).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    #[test]
    fn derivative_of_fourier_mode() {
        let g = Grid::new(20.0, 256).unwrap();
        let f = ScalarField::from_fn(&g, |x| (PI * x / 20.0).sin());
        let exact = ScalarField::from_fn(&g, |x| PI / 20.0 * (PI * x / 20.0).cos());
        assert!(f.ddx().distance(&exact).unwrap() < 1e-12);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = Grid::new(20.0, 64).unwrap();
        let f = ScalarField::from_fn(&g, |_| 3.5);
        assert!(f.ddx().max_abs() < 1e-14);
    }

    #[test]
    fn derivative_of_sech() {
        let g = Grid::new(20.0, 256).unwrap();
        let f = ScalarField::from_fn(&g, sech);
        let exact = ScalarField::from_fn(&g, |x| -sech(x) * x.tanh());
        let err = f.ddx().sub(&exact).unwrap();
        // the periodic extension has a kink of size sech(L) ~ 4e-9 at the seam
        assert!(err.max_abs() < 1e-8);
        let interior = err.values().iter().zip(g.points()).filter(|(_, x)| x.abs() <= 10.0);
        assert!(interior.fold(0.0f64, |m, (e, _)| m.max(e.abs())) < 1e-10);
    }

    #[test]
    fn quadratures() {
        let g = Grid::new(20.0, 256).unwrap();
        let s2 = ScalarField::from_fn(&g, |x| sech(x).powi(2));
        let s4 = ScalarField::from_fn(&g, |x| sech(x).powi(4));
        assert!((s2.integrate() - 2.0).abs() < 1e-10);
        assert!((s4.integrate() - 4.0 / 3.0).abs() < 1e-10);
        assert_eq!(ScalarField::zeros(&g).integrate(), 0.0);
    }

    #[test]
    fn cumint_of_sech_squared() {
        let g = Grid::new(20.0, 256).unwrap();
        let s2 = ScalarField::from_fn(&g, |x| sech(x).powi(2));
        let f = s2.cumint();
        assert_eq!(f.values()[0], 0.0);
        let exact = ScalarField::from_fn(&g, |x| x.tanh() + 1.0);
        // exact antiderivative anchored at x_0 = -L
        let shift = exact.values()[0];
        let exact = exact.map(|v| v - shift);
        assert!(f.distance(&exact).unwrap() < 1e-8);
        assert!((f.values()[g.len() - 1] + g.spacing() * s2.values()[g.len() - 1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn cumint_inverts_derivative() {
        let g = Grid::new(20.0, 256).unwrap();
        let f = ScalarField::from_fn(&g, |x| (-(x - 1.0).powi(2)).exp() * (3.0 * x).cos());
        let back = f.ddx().cumint();
        let expected = f.map(|v| v - f.values()[0]);
        assert!(back.distance(&expected).unwrap() < 1e-6);
        let centred = ScalarField::from_fn(&g, |x| -2.0 * x * (-(x * x)).exp());
        assert!(centred.integrate().abs() < 1e-10);
        assert!(centred.cumint().ddx().distance(&centred).unwrap() < 1e-6);
    }

    #[test]
    fn integral_of_derivative_vanishes() {
        let g = Grid::new(10.0, 128).unwrap();
        let f = ScalarField::from_fn(&g, |x| x.sin() + 0.3 * x);
        assert!(f.ddx().integrate().abs() < 1e-10);
    }

    #[test]
    fn decay_diagnostics() {
        let g = Grid::new(20.0, 256).unwrap();
        let f = ScalarField::from_fn(&g, sech);
        let d = f.boundary_decay();
        assert!(d > 1e-9 && d < 1e-8, "decay {d}");
        assert_eq!(ScalarField::from_fn(&g, |_| 1.0).boundary_decay(), 1.0);
        assert_eq!(ScalarField::zeros(&g).boundary_decay(), 0.0);
    }

    #[test]
    fn asymptotic_derivative_of_kink() {
        let g = Grid::new(20.0, 256).unwrap();
        let f = MatrixField::from_fn(&g, |x| CMat::from_element(1, 1, C64::new(x.tanh(), 0.0)));
        let exact = MatrixField::from_fn(&g, |x| CMat::from_element(1, 1, C64::new(sech(x).powi(2), 0.0)));
        assert!(f.ddx_asymptotic().distance(&exact).unwrap() < 1e-8);
        let s = 0.37 * g.spacing();
        let shifted = MatrixField::from_fn(&g, |x| CMat::from_element(1, 1, C64::new((x + s).tanh(), 0.0)));
        assert!(f.shifted_asymptotic(s).distance(&shifted).unwrap() < 1e-8);
    }
}
