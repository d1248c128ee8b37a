//! Learnable full-resolution coordinate tables composed with small
//! coordinate networks (MLP or sine-activated), plus the baselines,
//! arrangement-invariance harness, spectral analysis and multi-height
//! lensless phase retrieval built on top of them.

pub mod coord_table;
pub mod error;
pub mod lensless;
pub mod network;
pub mod numerics;
pub mod spectral;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
