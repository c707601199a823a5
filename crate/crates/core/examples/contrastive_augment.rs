//! Augmented views of a sequence and the reordering loss over a small batch
//! of encoded view pairs.
//!
//! ```text
//! cargo run --example contrastive_augment
//! ```

use pdmrec::contrastive::{
    contrastive_forward, crop_items, mask_items, reorder, reordering_sequence_loss, Direction,
    Representation,
};
use pdmrec::model::Model;
use pdmrec::train::TrainConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdmrec::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let seq: Vec<usize> = (1..=10).collect();
    println!("source   {seq:?}");
    println!("reorder  {:?}", reorder(&seq, 0.4, &mut rng));
    println!("mask     {:?}", mask_items(&seq, 0.3, 99, &mut rng));
    println!("crop     {:?}", crop_items(&seq, 0.3, &mut rng));

    let cfg = TrainConfig {
        dim: 16,
        mlp_inner: 16,
        max_len: 10,
        ..Default::default()
    };
    let model = Model::<f64>::new(cfg.model_config(40), &mut rng)?;
    let augmenter = cfg.augmenter(&model.config);
    let batch: Vec<Vec<usize>> = (0..3).map(|u| (1..=10).map(|i| 10 * u + i).collect()).collect();
    let mut pairs = Vec::new();
    for seq in &batch {
        let (a, b) = augmenter.pair(seq, &mut rng);
        println!("{seq:?} -> {a:?} / {b:?}");
        pairs.push((model.fixed_length(&a), model.fixed_length(&b)));
    }
    // Eval passes differ only by the reordering; training passes add dropout.
    for training in [false, true] {
        let mut views = Vec::new();
        for (a, b) in &pairs {
            let (za, zb) = contrastive_forward(&model, (a, b), Representation::Concat, training, &mut rng)?;
            views.push(za);
            views.push(zb);
        }
        for direction in [Direction::Symmetric, Direction::Forward] {
            let loss = reordering_sequence_loss(&views, direction)?;
            println!("training {training}, {direction}: reordering loss {loss:.3e}");
        }
    }
    println!("uniform similarities would give {:.4}", 4f64.ln());
    Ok(())
}
