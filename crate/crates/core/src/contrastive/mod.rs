//! Sequence augmentations and the reordering contrastive objective.
//!
//! Two augmented views of each training sequence are encoded by the same
//! block stack as the recommender, but with every positional input switched
//! off, so contrastive gradients never reach the positional table or the
//! positional projections.

mod augment;
mod loss;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use augment::{
    crop_items, mask_items, reorder, window_len, AugmentationKind, AugmentationOp, Augmenter,
};
pub use loss::{reordering_loss_on_tape, reordering_sequence_loss, Direction};

use crate::data::PAD;
use crate::error::{Error, Result};
use crate::model::{encode_on_tape, last_real_slot, Model, ModelConfig, ModelTensors, PassOptions};
use crate::numerics::{Real, Tape, Var};

/// What a contrastive view is reduced to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Representation {
    /// Every real-slot hidden row of the position-free stack, concatenated.
    #[default]
    Concat,
    /// Only the hidden row of the last real slot.
    Last,
    /// Every real-slot hidden row of the stack run with positions enabled.
    PostAggregation,
}

impl Representation {
    fn uses_positions(self) -> bool {
        self == Representation::PostAggregation
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Concat => "concat",
            Representation::Last => "last",
            Representation::PostAggregation => "post-aggregation",
        })
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Representation::Concat),
            "last" => Ok(Representation::Last),
            "post-aggregation" => Ok(Representation::PostAggregation),
            _ => Err(Error::Config(format!("unknown contrastive representation `{s}`"))),
        }
    }
}

/// Encodes one fixed-length view into a `1 × D` row. For the concatenated
/// forms `D = L·d` with padding rows zeroed, so views with different numbers
/// of real slots still align slot by slot under a dot product.
pub fn view_on_tape<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<'_, T>,
    cfg: &ModelConfig,
    vars: &ModelTensors<Var>,
    slots: &[usize],
    repr: Representation,
    training: bool,
    rng: &mut R,
) -> Var {
    let opts = PassOptions {
        positions: repr.uses_positions(),
        training,
    };
    let trace = encode_on_tape(tape, cfg, vars, slots, opts, rng);
    match repr {
        Representation::Last => {
            tape.select_row(trace.hidden, last_real_slot(slots))
        }
        Representation::Concat | Representation::PostAggregation => {
            let keep: Vec<bool> = slots.iter().map(|&s| s != PAD).collect();
            let masked = tape.mask_rows(trace.hidden, &keep);
            tape.flatten(masked)
        }
    }
}

/// Compact representations of a pair of fixed-length views: for the
/// concatenated forms, only real-slot rows (`#real · d` values).
pub fn contrastive_forward<T: Real, R: Rng + ?Sized>(
    model: &Model<T>,
    pair: (&[usize], &[usize]),
    repr: Representation,
    training: bool,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>)> {
    let mut one = |slots: &[usize]| -> Result<Vec<T>> {
        // Validates shape and index range.
        model.embed_sequence(slots)?;
        let mut tape = Tape::new();
        let vars = model.params.bind(&mut tape);
        let v = view_on_tape(&mut tape, &model.config, &vars, slots, repr, training, rng);
        let flat = tape.value(v).data();
        Ok(match repr {
            Representation::Last => flat.to_vec(),
            _ => {
                let d = model.config.dim;
                slots
                    .iter()
                    .enumerate()
                    .filter(|&(_, &s)| s != PAD)
                    .flat_map(|(t, _)| flat[t * d..(t + 1) * d].iter().copied())
                    .collect()
            }
        })
    };
    let a = one(pair.0)?;
    let b = one(pair.1)?;
    Ok((a, b))
}
