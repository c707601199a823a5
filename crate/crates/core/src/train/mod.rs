//! Optimisation of the next-item objective plus the weighted contrastive
//! term, with early stopping on validation recall.

mod config;
mod fit;
mod step;

pub use config::{TrainConfig, Variant};
pub use fit::{fit, fit_to_dir, fit_with, EpochRecord, TrainOutcome, TrainState, LOG_HEADER};
pub use step::{
    batch_loss_on_tape, compute_loss_and_grads, contrastive_grads, main_loss, main_loss_on_tape,
    new_adam, train_step, training_cases, LossParts, LossVars, Objective, TrainCase,
};
