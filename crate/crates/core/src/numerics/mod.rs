//! Dense matrices, forward primitives, reverse-mode gradients and Adam.

mod adam;
mod matrix;
pub mod ops;
mod tape;

pub use adam::{AdamConfig, AdamState, Moments};
pub use matrix::{Matrix, Real};
pub use tape::{CeTerm, Gradients, Tape, Var};
