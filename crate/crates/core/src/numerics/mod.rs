//! Deterministic numerical kernels shared by the rest of the crate.
//!
//! Everything here is a pure function over caller-owned buffers, so the
//! kernels can be called from several threads on disjoint data.

mod adam;
mod complex_grid;
mod fft;
mod grid;
mod rng;
mod tensor;
#[allow(clippy::excessive_precision)] // reference constants keep their published digits
mod trig;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use complex_grid::ComplexGrid;
pub use fft::{fft2, fft2_in_place, Fft2Plan};
pub use grid::Grid;
pub use rng::{seeded_permutation, Rng};
pub use tensor::{dense_affine, matmul_into, Tensor2D, Transpose};
pub use trig::{sin_cos, sine_activation};
