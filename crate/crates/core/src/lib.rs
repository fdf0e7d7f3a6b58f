//! Spectral transform for rational Lax matrices with simple poles, built on
//! Szegő kernels of the spectral curve.

pub mod error;
pub mod linalg;
pub mod poly;
pub mod quad;
pub mod json;
pub mod ratmat;
pub mod curve;
pub mod periods;
pub mod theta;
pub mod symplectic;
pub mod transform;
pub mod cli;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
