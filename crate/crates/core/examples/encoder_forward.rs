//! One eval-mode pass through a freshly initialized encoder: the user
//! vector, the top scored items and the attention maps of the final slot.
//!
//! ```text
//! cargo run --example encoder_forward
//! ```

use pdmrec::model::Model;
use pdmrec::train::TrainConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdmrec::Result<()> {
    let cfg = TrainConfig {
        dim: 16,
        mlp_inner: 16,
        max_len: 8,
        ..Default::default()
    };
    let model = Model::<f64>::new(cfg.model_config(30), &mut ChaCha8Rng::seed_from_u64(0))?;
    let history = [4, 9, 17, 2, 25];
    let slots = model.fixed_length(&history);
    println!("slots {slots:?}");

    let user = model.user_vector(&history)?;
    let norm = user.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("user vector: {} dims, norm {norm:.4}", user.len());

    let scores = model.score_all(&user);
    let mut order: Vec<usize> = (1..=scores.len()).collect();
    order.sort_by(|&a, &b| scores[b - 1].total_cmp(&scores[a - 1]));
    println!("top 5 items {:?}", &order[..5]);

    let maps = model.attention_maps(&slots)?;
    let last = slots.len() - 1;
    for (b, heads) in maps.item.iter().enumerate() {
        for (h, w) in heads.iter().enumerate() {
            println!("block {b} item head {h}, final slot: {:.3?}", w.row(last));
        }
    }
    for (b, heads) in maps.positional.iter().enumerate() {
        for (h, w) in heads.iter().enumerate() {
            println!("block {b} positional head {h}, final slot: {:.3?}", w.row(last));
        }
    }
    Ok(())
}
