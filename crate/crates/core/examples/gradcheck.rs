//! Analytic gradients of the full objective against central differences,
//! reported per tensor on a toy model.
//!
//! ```text
//! cargo run --example gradcheck
//! ```

use pdmrec::model::{Activation, Model};
use pdmrec::numerics::Tape;
use pdmrec::train::{batch_loss_on_tape, compute_loss_and_grads, Objective, TrainCase, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdmrec::Result<()> {
    let cfg = TrainConfig {
        dim: 8,
        mlp_inner: 8,
        max_len: 6,
        alpha: 0.5,
        ..Default::default()
    };
    let mut mcfg = cfg.model_config(10);
    mcfg.activation = Activation::Gelu;
    let model = Model::<f64>::new(mcfg, &mut ChaCha8Rng::seed_from_u64(1))?;
    let objective = Objective::from_config(&cfg, &model.config);
    let batch = [
        TrainCase { prefix: vec![1, 2, 3], target: 4 },
        TrainCase { prefix: vec![5, 6, 7, 8], target: 9 },
        TrainCase { prefix: vec![2, 4, 6, 8, 10], target: 1 },
    ];
    // A fixed stream keeps dropout masks and views identical across passes.
    let stream = || ChaCha8Rng::seed_from_u64(2);
    let loss_of = |m: &Model<f64>| {
        let mut tape = Tape::new();
        let vars = m.params.bind(&mut tape);
        let loss = batch_loss_on_tape(&mut tape, &m.config, &objective, &vars, &batch, &mut stream());
        tape.scalar(loss.total)
    };

    let (parts, grads) = compute_loss_and_grads(&model, &objective, &batch, &mut stream());
    println!(
        "main {:.5}  contrastive {:.5}  total {:.5}",
        parts.main, parts.contrastive, parts.total
    );
    let h = 1e-4;
    for (t, (name, tensor)) in model.params.entries().into_iter().enumerate() {
        let mut worst = 0.0f64;
        for i in 0..tensor.len() {
            let mut plus = model.clone();
            plus.params.slots_mut()[t].data_mut()[i] += h;
            let mut minus = model.clone();
            minus.params.slots_mut()[t].data_mut()[i] -= h;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let a = grads[t].data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!("{name:<20} max relative error {worst:.2e}");
    }
    Ok(())
}
