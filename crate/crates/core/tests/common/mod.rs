#![allow(dead_code)]

use pdmrec::data::synthetic::{generate_synthetic, Ordering, SyntheticConfig};
use pdmrec::data::{prepare, FilterRule, SplitDataset};
use pdmrec::train::TrainConfig;

pub fn synthetic_split(cfg: SyntheticConfig) -> SplitDataset {
    let log = generate_synthetic(&cfg).expect("valid synthetic config");
    prepare(&log, &FilterRule::preset("any-flag").unwrap(), 0)
}

pub fn chain_data(seed: u64) -> SplitDataset {
    synthetic_split(SyntheticConfig {
        ordering: Ordering::Chain,
        seed,
        ..Default::default()
    })
}

pub fn shuffled_data(seed: u64) -> SplitDataset {
    synthetic_split(SyntheticConfig {
        ordering: Ordering::Shuffled,
        seed,
        ..Default::default()
    })
}

/// The full configuration scaled to d = 32, L = 20.
pub fn desk_config() -> TrainConfig {
    TrainConfig {
        dim: 32,
        mlp_inner: 32,
        max_len: 20,
        valid_k: 20,
        ..Default::default()
    }
}
