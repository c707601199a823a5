//! Trains on a synthetic chain dataset and reports test metrics.
//!
//! ```text
//! cargo run --release --example train_synthetic -- [variant] [epochs] [batch]
//! ```

use pdmrec::data::synthetic::{generate_synthetic, Ordering, SyntheticConfig};
use pdmrec::data::{prepare, FilterRule, Holdout};
use pdmrec::eval::evaluate;
use pdmrec::train::{fit_with, TrainConfig};

fn main() -> pdmrec::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let variant = args.next().unwrap_or_else(|| "full".into()).parse()?;
    let epochs = args.next().map_or(Ok(30), |s| s.parse()).expect("epochs");
    let batch = args.next().map_or(Ok(32), |s| s.parse()).expect("batch");

    let log = generate_synthetic(&SyntheticConfig {
        ordering: Ordering::Chain,
        ..Default::default()
    })?;
    let data = prepare(&log, &FilterRule::preset("any-flag")?, 0);
    println!("{} users, {} items", data.num_users(), data.num_items());

    let cfg = TrainConfig {
        dim: 32,
        mlp_inner: 32,
        max_len: 20,
        batch_size: batch,
        max_epochs: epochs,
        valid_k: 20,
        variant,
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let out = fit_with::<f32>(&data, &cfg, |_| {})?;
    println!(
        "best epoch {} with valid recall@20 {:.3} after {:.1}s",
        out.best_epoch,
        out.best_valid,
        start.elapsed().as_secs_f64()
    );
    let report = evaluate(&out.best, &data, Holdout::Test, &cfg.eval_ks)?;
    print!("{}", report.metrics_text().lines().take(9).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
