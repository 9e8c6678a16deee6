//! Numerical verification of the u(n) AKNS hierarchy, the development map
//! between paths on a complex Grassmannian and off-block matrix fields, the
//! associated hierarchy of symplectic structures, and the KdV recursion
//! operators.
//!
//! Fields live on a periodic grid standing in for the real line; every
//! identity is checked as a quantitative residual.

// tolerance checks are written `!(x < tol)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod hierarchy;
pub mod development;
pub mod lie;
pub mod presets;
pub mod symplectic;
pub mod flows;
pub mod kdv;
pub mod io;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Grid, MatrixField, ScalarField, SkewField};
pub use lie::{OrbitParams, CMat, C64};
