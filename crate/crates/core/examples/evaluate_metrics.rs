//! Ranking with pessimistic ties and excluded items, Recall@K and NDCG@K,
//! and a full report for an untrained model on synthetic data.
//!
//! ```text
//! cargo run --example evaluate_metrics
//! ```

use std::collections::HashSet;

use pdmrec::data::{generate_synthetic, prepare, FilterRule, Holdout, SyntheticConfig};
use pdmrec::eval::{evaluate, ndcg_at_k, rank_of, recall_at_k};
use pdmrec::model::Model;
use pdmrec::train::TrainConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdmrec::Result<()> {
    let scores = [0.5, 0.9, 0.1, 0.7, 0.7, 0.2, 0.8, 0.3];
    let excluded: HashSet<usize> = [2, 7].into();
    let ranks: Vec<usize> = (1..=scores.len())
        .filter(|i| !excluded.contains(i))
        .map(|t| rank_of(&scores, t, &excluded))
        .collect();
    println!("ranks with items 2 and 7 excluded: {ranks:?}");
    for k in [1, 3, 5] {
        println!(
            "recall@{k} {:.3}  ndcg@{k} {:.3}",
            recall_at_k(&ranks, k),
            ndcg_at_k(&ranks, k)
        );
    }

    let log = generate_synthetic(&SyntheticConfig::default())?;
    let data = prepare(&log, &FilterRule::preset("any-flag")?, 0);
    let cfg = TrainConfig {
        dim: 16,
        mlp_inner: 16,
        max_len: 20,
        ..Default::default()
    };
    let model = Model::<f32>::new(cfg.model_config(data.num_items()), &mut ChaCha8Rng::seed_from_u64(0))?;
    let report = evaluate(&model, &data, Holdout::Test, &cfg.eval_ks)?;
    print!("{}", report.to_text());
    Ok(())
}
