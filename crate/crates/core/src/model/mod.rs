//! The position-decoupled encoder: configuration, parameters, forward pass,
//! scoring and checkpoints.

pub mod checkpoint;
mod config;
mod encoder;
mod params;

pub use config::{Activation, ModelConfig, PositionalMode, ResidualSource};
pub use encoder::{
    block_on_tape, encode_on_tape, AttentionMaps, AttentionMask, BlockTrace, BranchTrace,
    EncoderTrace, HeadOutput, Model, PassOptions, SequenceRepresentation, last_real_slot,
};
pub use params::{shapes, BlockTensors, ModelParams, ModelTensors};
