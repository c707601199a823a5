//! Sequential next-item recommendation with a position-decoupled
//! self-attention encoder.
//!
//! Item content and slot positions are attended to by separate branches
//! whose outputs are summed before a feed-forward aggregator. A
//! reordering-based contrastive objective, computed without positional
//! information, regularises the item representations.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, a reverse-mode tape and the Adam optimizer
//! - [`data`]: interaction logs, positive filtering, k-core pruning,
//!   fixed-length sequences, leave-one-out splits and synthetic data
//! - [`model`]: parameters, the context-aware block stack and checkpoints
//! - [`contrastive`]: sequence augmentations and the reordering sequence loss
//! - [`train`]: configuration, variants, the optimisation loop and early stopping
//! - [`eval`]: whole-catalog ranking metrics and parameter accounting
//! - [`cli`]: the `pdmrec` command-line surface
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod contrastive;
pub mod data;
pub mod error;
pub mod eval;
mod kv;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
pub use numerics::{Matrix, Real};
