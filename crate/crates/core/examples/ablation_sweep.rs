//! Trains every variant briefly on one synthetic dataset and prints a
//! comparison table.
//!
//! ```text
//! cargo run --release --example ablation_sweep -- [epochs]
//! ```

use pdmrec::data::{generate_synthetic, prepare, FilterRule, Holdout, SyntheticConfig};
use pdmrec::eval::evaluate;
use pdmrec::train::{fit, TrainConfig, Variant};

fn main() -> pdmrec::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let epochs = std::env::args().nth(1).map_or(Ok(10), |s| s.parse()).expect("epochs");
    let log = generate_synthetic(&SyntheticConfig::default())?;
    let data = prepare(&log, &FilterRule::preset("any-flag")?, 0);
    println!("data hash {}", data.content_hash());
    println!("variant\tbest_epoch\trecall@20\tndcg@20");
    for variant in Variant::ALL {
        let cfg = TrainConfig {
            dim: 32,
            mlp_inner: 32,
            max_len: 20,
            batch_size: 64,
            max_epochs: epochs,
            valid_k: 20,
            variant,
            ..Default::default()
        };
        let out = fit::<f32>(&data, &cfg)?;
        let report = evaluate(&out.best, &data, Holdout::Test, &[20])?;
        println!(
            "{}\t{}\t{:.4}\t{:.4}",
            variant.tag(),
            out.best_epoch,
            report.recall[0],
            report.ndcg[0]
        );
    }
    Ok(())
}
