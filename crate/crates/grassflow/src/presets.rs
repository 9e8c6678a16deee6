//! Preset fields and seeded random test fields.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::development::{undevelop, GrassmannPath};
use crate::error::{Error, Result};
use crate::field::{Grid, MatrixField, ScalarField};
use crate::hierarchy::offblock_field;
use crate::lie::{CMat, OrbitParams, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Vacuum,
    Soliton,
    Gaussian,
    DevelopedSoliton,
    KdvWave,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Vacuum,
        Preset::Soliton,
        Preset::Gaussian,
        Preset::DevelopedSoliton,
        Preset::KdvWave,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Vacuum => "vacuum",
            Preset::Soliton => "soliton",
            Preset::Gaussian => "gaussian",
            Preset::DevelopedSoliton => "developed-soliton",
            Preset::KdvWave => "kdv-wave",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Grid, orbit and seed for [`make_field`].
#[derive(Clone, Debug, PartialEq)]
pub struct PresetParams {
    pub n: usize,
    pub k: usize,
    pub half_width: f64,
    pub len: usize,
    pub seed: u64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self { n: 2, k: 1, half_width: 20.0, len: 256, seed: 42 }
    }
}

/// A field of one of the three file kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Skew(MatrixField),
    Path(MatrixField),
    Scalar(ScalarField),
}

impl FieldData {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldData::Skew(_) => "skew_field",
            FieldData::Path(_) => "grassmann_path",
            FieldData::Scalar(_) => "scalar_field",
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            FieldData::Skew(f) | FieldData::Path(f) => f.grid(),
            FieldData::Scalar(f) => f.grid(),
        }
    }
}

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Block field with `sech(x)` in its first entry.
pub fn soliton_block(grid: &Grid, params: &OrbitParams) -> MatrixField {
    let (r, c) = params.block_shape();
    MatrixField::from_fn(grid, |x| {
        let mut b = CMat::zeros(r, c);
        b[(0, 0)] = C64::new(sech(x), 0.0);
        b
    })
}

/// `offblock(q)` for the soliton block.
pub fn soliton(grid: &Grid, params: &OrbitParams) -> MatrixField {
    offblock_field(&soliton_block(grid, params), params).expect("block shape")
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn complex_normal(rng: &mut impl Rng) -> C64 {
    C64::new(normal(rng), normal(rng))
}

/// Sum of two Gaussian bumps per block entry, centres in `[-4, 4]`, widths in
/// `[0.8, 1.6]`, complex amplitudes of size about `0.5`.
pub fn gaussian_block(grid: &Grid, params: &OrbitParams, seed: u64) -> MatrixField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = params.block_shape();
    let bumps: Vec<Vec<(f64, f64, C64)>> = (0..r * c)
        .map(|_| {
            (0..2)
                .map(|_| {
                    let centre = rng.random_range(-4.0..4.0);
                    let width = rng.random_range(0.8..1.6);
                    (centre, width, complex_normal(&mut rng) * 0.5)
                })
                .collect()
        })
        .collect();
    MatrixField::from_fn(grid, |x| {
        CMat::from_fn(r, c, |i, j| {
            bumps[i * c + j]
                .iter()
                .map(|&(m, w, amp)| amp * (-(x - m).powi(2) / (2.0 * w * w)).exp())
                .sum()
        })
    })
}

/// Random perp field supported near a random centre.
pub fn random_perp_bump(grid: &Grid, params: &OrbitParams, rng: &mut impl Rng) -> MatrixField {
    let (r, c) = params.block_shape();
    let centre = rng.random_range(-5.0..5.0);
    let width = rng.random_range(0.7..1.5);
    let amp = CMat::from_fn(r, c, |_, _| complex_normal(rng));
    let q = MatrixField::from_fn(grid, |x| &amp * C64::new((-(x - centre).powi(2) / (2.0 * width * width)).exp(), 0.0));
    offblock_field(&q, params).expect("block shape")
}

/// Random skew field `xi(x) = b(x) X` with `X` a random element of u(n) and `b`
/// a Gaussian bump.
pub fn random_skew_bump(grid: &Grid, n: usize, rng: &mut impl Rng) -> MatrixField {
    let m = CMat::from_fn(n, n, |_, _| complex_normal(rng));
    let x = (&m - m.adjoint()) * C64::new(0.5, 0.0);
    let centre = rng.random_range(-4.0..4.0);
    let width = rng.random_range(0.8..1.5);
    MatrixField::from_fn(grid, |s| &x * C64::new((-(s - centre).powi(2) / (2.0 * width * width)).exp(), 0.0))
}

/// Two random Gaussian bumps, real-valued.
pub fn random_scalar_bump(grid: &Grid, rng: &mut impl Rng) -> ScalarField {
    let bumps: Vec<(f64, f64, f64)> = (0..2)
        .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.random_range(-4.0..4.0), rng.random_range(0.8..1.5)))
        .collect();
    ScalarField::from_fn(grid, |x| bumps.iter().map(|&(a, c, w)| a * (-(x - c).powi(2) / (2.0 * w * w)).exp()).sum())
}

/// Travelling wave of `q_t = (q_xxx - 6 q q_x)/4`:
/// `q = -2 kappa^2 sech^2(kappa (x + kappa^2 t))`.
pub fn kdv_wave(grid: &Grid, kappa: f64, t: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| -2.0 * kappa * kappa * sech(kappa * (x + kappa * kappa * t)).powi(2))
}

/// Builds a preset field. Deterministic in `(preset, params)`.
pub fn make_field(preset: Preset, p: &PresetParams) -> Result<FieldData> {
    let grid = Grid::new(p.half_width, p.len)?;
    if preset == Preset::KdvWave {
        return Ok(FieldData::Scalar(kdv_wave(&grid, 1.0, 0.0)));
    }
    let params = OrbitParams::new(p.n, p.k)?;
    Ok(match preset {
        Preset::Vacuum => FieldData::Skew(MatrixField::zeros(&grid, p.n, p.n)),
        Preset::Soliton => FieldData::Skew(soliton(&grid, &params)),
        Preset::Gaussian => FieldData::Skew(offblock_field(&gaussian_block(&grid, &params, p.seed), &params)?),
        Preset::DevelopedSoliton => {
            let fp = undevelop(&soliton(&grid, &params), &params)?;
            FieldData::Path(GrassmannPath::new(fp.gamma().clone(), &params)?.into_field())
        }
        Preset::KdvWave => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!(matches!("bogus".parse::<Preset>(), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn vacuum_is_zero() {
        let f = make_field(Preset::Vacuum, &PresetParams::default()).unwrap();
        match f {
            FieldData::Skew(u) => assert_eq!(u.max_norm(), 0.0),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn soliton_decays() {
        match make_field(Preset::Soliton, &PresetParams::default()).unwrap() {
            FieldData::Skew(u) => assert!(u.boundary_decay() < 1e-8),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn gaussian_is_deterministic() {
        let p = PresetParams { n: 3, k: 1, ..Default::default() };
        let a = make_field(Preset::Gaussian, &p).unwrap();
        let b = make_field(Preset::Gaussian, &p).unwrap();
        assert_eq!(a, b);
        let c = make_field(Preset::Gaussian, &PresetParams { seed: 7, ..p }).unwrap();
        assert_ne!(a, c);
        if let FieldData::Skew(u) = a {
            assert!(u.boundary_decay() < 1e-12);
        }
    }
}
