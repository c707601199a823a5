//! Learnable parameter counts per variant at the default shape.
//!
//! ```text
//! cargo run --example parameter_count -- [num_items] [max_len]
//! ```

use pdmrec::eval::count_parameters;
use pdmrec::train::{TrainConfig, Variant};

fn main() -> pdmrec::Result<()> {
    let mut args = std::env::args().skip(1);
    let items: usize = args.next().map_or(Ok(33_273), |s| s.parse()).expect("num_items");
    let max_len: usize = args.next().map_or(Ok(100), |s| s.parse()).expect("max_len");
    for variant in [Variant::Full, Variant::NoPositional, Variant::AdditivePositions, Variant::MaskViews] {
        let cfg = TrainConfig {
            max_len,
            variant,
            ..Default::default()
        };
        let count = count_parameters(&cfg.model_config(items));
        println!(
            "{:<8} total {:>10}  item table {:>10}  positional {:>6}",
            variant.tag(),
            count.total,
            count.item_embeddings,
            count.positional_embeddings
        );
    }
    let cfg = TrainConfig {
        max_len,
        ..Default::default()
    };
    for (name, r, c) in count_parameters(&cfg.model_config(items)).tensors {
        println!("  {name:<20} {r:>6} x {c:<4} = {}", r * c);
    }
    Ok(())
}
