//! From raw engagement logs to leave-one-out splits.
//!
//! The usual pipeline is [`read_log`] → [`filter_positive`] →
//! [`k_core_prune`] → [`build_sequences`] → [`leave_one_out_split`].
//! [`generate_synthetic`] stands in for the raw log in tests and examples.

mod kcore;
mod record;
mod sequence;
mod split;
pub mod synthetic;

pub use kcore::k_core_prune;
pub use record::{filter_positive, read_log, write_log, FilterRule, InteractionRecord};
pub use sequence::{
    build_sequences, to_fixed_length, ItemIndex, PadSide, PositiveSequence, MIN_SEQUENCE_LEN, PAD,
};
pub use split::{leave_one_out_split, Holdout, SplitDataset, UserSplit};
pub use synthetic::{generate_synthetic, SyntheticConfig};

/// Filter, prune and split a raw log in one go.
pub fn prepare(
    log: &[InteractionRecord],
    rule: &FilterRule,
    k_core: usize,
) -> SplitDataset {
    let positive = filter_positive(log, rule);
    let pruned = k_core_prune(&positive, k_core);
    let (sequences, items) = build_sequences(&pruned);
    leave_one_out_split(&sequences, items)
}
