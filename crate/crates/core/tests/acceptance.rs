//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use pdmrec::contrastive::{crop_items, mask_items, reorder, window_len};
use pdmrec::data::synthetic::{generate_synthetic, SyntheticConfig};
use pdmrec::data::{
    build_sequences, filter_positive, k_core_prune, leave_one_out_split, FilterRule, Holdout,
    InteractionRecord,
};
use pdmrec::eval::{evaluate, ndcg_at_k, rank_of, recall_at_k};
use pdmrec::model::{encode_on_tape, Activation, Model, ModelConfig, PassOptions};
use pdmrec::numerics::{Matrix, Tape};
use pdmrec::train::{
    batch_loss_on_tape, compute_loss_and_grads, contrastive_grads, fit, fit_to_dir, Objective,
    TrainCase, TrainConfig, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, items: usize, max_len: usize) -> Vec<TrainCase> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(2..=max_len);
            TrainCase {
                prefix: (0..len).map(|_| rng.random_range(1..=items)).collect(),
                target: rng.random_range(1..=items),
            }
        })
        .collect()
}

fn toy_config() -> (ModelConfig, TrainConfig) {
    let train = TrainConfig {
        dim: 8,
        heads: 2,
        blocks: 2,
        mlp_inner: 8,
        max_len: 8,
        lambda: 0.1,
        ..Default::default()
    };
    (train.model_config(20), train)
}

fn relative_error(a: f64, b: f64) -> f64 {
    // Absolute floor for entries that are zero up to finite-difference noise.
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

struct GradientCheck {
    worst: f64,
    at: String,
    checked: usize,
    /// Entries whose one-sided differences disagree, so the loss has a kink
    /// within the step.
    kinked: usize,
}

/// Compares analytic gradients with central differences over every scalar
/// parameter. With `skip_kinks`, entries whose left and right differences
/// disagree are counted and left out.
fn gradient_check(activation: Activation, h: f64, skip_kinks: bool) -> GradientCheck {
    let (mut mcfg, tcfg) = toy_config();
    mcfg.activation = activation;
    let model = Model::<f64>::new(mcfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let objective = Objective::from_config(&tcfg, &model.config);
    let batch = random_batch(&mut ChaCha8Rng::seed_from_u64(12), 4, 20, 8);
    // Same stream for every evaluation, so dropout masks and views are fixed.
    let stream = || ChaCha8Rng::seed_from_u64(13);

    let (parts, analytic) = compute_loss_and_grads(&model, &objective, &batch, &mut stream());
    assert!(parts.contrastive > 0.0, "contrastive term inactive");
    let loss_of = |m: &Model<f64>| {
        let mut tape = Tape::new();
        let vars = m.params.bind(&mut tape);
        let l = batch_loss_on_tape(&mut tape, &m.config, &objective, &vars, &batch, &mut stream());
        tape.scalar(l.total)
    };
    let base = loss_of(&model);

    let mut out = GradientCheck {
        worst: 0.0,
        at: String::new(),
        checked: 0,
        kinked: 0,
    };
    let names: Vec<String> = model.params.entries().into_iter().map(|(n, _)| n).collect();
    for (t, name) in names.iter().enumerate() {
        for i in 0..analytic[t].len() {
            let mut plus = model.clone();
            plus.params.slots_mut()[t].data_mut()[i] += h;
            let mut minus = model.clone();
            minus.params.slots_mut()[t].data_mut()[i] -= h;
            let (up, down) = (loss_of(&plus), loss_of(&minus));
            if skip_kinks && relative_error((up - base) / h, (base - down) / h) > 1e-2 {
                out.kinked += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let rel = relative_error(analytic[t].data()[i], numeric);
            if rel > out.worst {
                out.worst = rel;
                out.at = format!("{name}[{i}]");
            }
            out.checked += 1;
        }
    }
    out
}

/// Every scalar is checked with the smooth activation. Under the rectifier,
/// block-0 pre-activations at initialization are of order 1e-5, so a 1e-4
/// step straddles kinks for some entries; those are checked only where the
/// loss is smooth across the step, and the unfiltered figure is reported.
fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let smooth = gradient_check(Activation::Gelu, 1e-4, false);
    let relu = gradient_check(Activation::Relu, 1e-4, true);
    let relu_all = gradient_check(Activation::Relu, 1e-4, false);
    let secs = start.elapsed().as_secs_f64();
    check(
        smooth.worst < 1e-3 && relu.worst < 1e-3 && secs < 60.0,
        format!(
            "gelu: {} scalars, max rel {:.2e} ({}); relu: {} smooth scalars, max rel {:.2e}, \
             {} straddle a kink (unfiltered max rel {:.2e}); {secs:.1}s",
            smooth.checked,
            smooth.worst,
            smooth.at,
            relu.checked,
            relu.worst,
            relu.kinked,
            relu_all.worst
        ),
    )
}

fn decomposition_identity() -> Outcome {
    let mut checked = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig {
            num_items: 30,
            max_len: 10,
            dim: 12,
            heads: 3,
            blocks: 2,
            mlp_inner: 10,
            init_std: 0.5,
            ..Default::default()
        };
        let model = Model::<f32>::new(cfg, &mut rng).unwrap();
        let len = rng.random_range(1..=10);
        let items: Vec<usize> = (0..len).map(|_| rng.random_range(1..=30)).collect();
        let slots = model.fixed_length(&items);

        let mut tape = Tape::new();
        let vars = model.params.bind(&mut tape);
        let trace = encode_on_tape(&mut tape, &model.config, &vars, &slots, PassOptions::EVAL, &mut rng);
        for (b, block) in trace.blocks.iter().enumerate() {
            let pos = block.positional.as_ref().expect("positional branch");
            let per_head_sums: Vec<Matrix<f32>> = block
                .item
                .heads
                .iter()
                .zip(&pos.heads)
                .map(|(&v, &p)| tape.value(v).add(tape.value(p)).unwrap())
                .collect();
            let refs: Vec<&Matrix<f32>> = per_head_sums.iter().collect();
            let concat_of_sums = pdmrec::numerics::ops::concat_cols(&refs).unwrap();
            let sum_of_concats = tape.value(block.item.concat).add(tape.value(pos.concat)).unwrap();
            let model_input = tape.value(block.aggregate_input);
            let bits = |m: &Matrix<f32>| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            if bits(&concat_of_sums) != bits(&sum_of_concats) || bits(&concat_of_sums) != bits(model_input) {
                return Err(format!("seed {seed} block {b}: concat of sums differs"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} blocks over 100 seeds bitwise equal"))
}

fn positional_separation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..100 {
        let cfg = ModelConfig {
            num_items: 25,
            max_len: 9,
            dim: 8,
            heads: 2,
            blocks: 2,
            mlp_inner: 8,
            init_std: 0.5,
            ..Default::default()
        };
        let model = Model::<f64>::new(cfg, &mut rng).unwrap();
        let len = rng.random_range(2..=9);
        let items: Vec<usize> = (0..len).map(|_| rng.random_range(1..=25)).collect();
        let slots = model.fixed_length(&items);
        let base = model.attention_maps(&slots).unwrap();

        let mut items_moved = model.clone();
        for v in items_moved.params.item_embeddings.data_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
        let m = items_moved.attention_maps(&slots).unwrap();
        if m.positional != base.positional {
            return Err(format!("trial {trial}: positional weights moved with item embeddings"));
        }
        if m.item == base.item {
            return Err(format!("trial {trial}: item perturbation had no effect"));
        }

        let mut pos_moved = model.clone();
        for v in pos_moved.params.positional.as_mut().unwrap().data_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
        let m = pos_moved.attention_maps(&slots).unwrap();
        // The first block's item branch sees item embeddings only; deeper
        // item branches consume the previous block's mixed output.
        if m.item[0] != base.item[0] {
            return Err(format!("trial {trial}: item weights moved with positional table"));
        }
        if m.positional == base.positional {
            return Err(format!("trial {trial}: positional perturbation had no effect"));
        }
    }
    Ok("100 trials, both directions bitwise unchanged".into())
}

fn contrastive_disentanglement() -> Outcome {
    let (mcfg, tcfg) = toy_config();
    let mut nonzero_elsewhere = 0;
    for b in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + b);
        let model = Model::<f64>::new(mcfg.clone(), &mut rng).unwrap();
        let objective = Objective::from_config(&tcfg, &model.config);
        let batch = random_batch(&mut rng, 6, 20, 8);
        let grads = contrastive_grads(&model, &objective, &batch, &mut rng)
            .ok_or("no contrastive loss")?;
        let positional = model.params.positional_names();
        for (name, g) in &grads {
            if positional.contains(name) {
                if g.data().iter().any(|&v| v != 0.0) {
                    return Err(format!("batch {b}: {name} has non-zero contrastive gradient"));
                }
            } else if g.data().iter().any(|&v| v != 0.0) {
                nonzero_elsewhere += 1;
            }
        }
    }
    check(
        nonzero_elsewhere > 0,
        format!("20 batches, positional gradients exactly zero ({nonzero_elsewhere} other tensors non-zero)"),
    )
}

fn sort_rank(scores: &[f64], target: usize, excluded: &HashSet<usize>) -> usize {
    let mut order: Vec<usize> = (1..=scores.len()).filter(|i| !excluded.contains(i)).collect();
    // Descending by score; a tie puts the target after its equals.
    order.sort_by(|&a, &b| {
        scores[b - 1]
            .partial_cmp(&scores[a - 1])
            .unwrap()
            .then((a == target).cmp(&(b == target)))
    });
    1 + order.iter().position(|&i| i == target).unwrap()
}

fn oracle_metrics(ranks: &[usize], k: usize) -> (f64, f64) {
    let mut hits = 0usize;
    let mut gain = 0.0;
    for &r in ranks {
        if r <= k {
            hits += 1;
            gain += 1.0 / ((r + 1) as f64).log2();
        }
    }
    (hits as f64 / ranks.len() as f64, gain / ranks.len() as f64)
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for inst in 0..200 {
        let n = rng.random_range(2..=1000);
        let users = rng.random_range(1..=30);
        let levels = rng.random_range(1..=50);
        let mut fast = Vec::new();
        let mut slow = Vec::new();
        for _ in 0..users {
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / 7.0).collect();
            let target = rng.random_range(1..=n);
            let excluded: HashSet<usize> =
                (1..=n).filter(|&i| i != target && rng.random_bool(0.1)).collect();
            fast.push(rank_of(&scores, target, &excluded));
            slow.push(sort_rank(&scores, target, &excluded));
        }
        for k in [1, 5, 20, 50, 100] {
            let want = oracle_metrics(&slow, k);
            if (recall_at_k(&fast, k), ndcg_at_k(&fast, k)) != want {
                return Err(format!("instance {inst} (|V| = {n}) K = {k} differs"));
            }
        }
    }

    // End to end through the evaluator on random models.
    for inst in 0..10u64 {
        let data = common::synthetic_split(SyntheticConfig {
            users: 40,
            items: 60 + 10 * inst as usize,
            seed: inst,
            ..Default::default()
        });
        let cfg = ModelConfig {
            num_items: data.num_items(),
            max_len: 12,
            dim: 8,
            mlp_inner: 8,
            init_std: 0.3,
            ..Default::default()
        };
        let model = Model::<f64>::new(cfg, &mut ChaCha8Rng::seed_from_u64(inst)).unwrap();
        let ks = [20, 50, 100];
        let report = evaluate(&model, &data, Holdout::Test, &ks).unwrap();
        let mut ranks = Vec::new();
        for u in 0..data.num_users() {
            let (history, target) = data.case(u, Holdout::Test);
            let scores = model.score_all(&model.user_vector(&history).unwrap());
            ranks.push(sort_rank(&scores, target, &data.excluded(u, Holdout::Test)));
        }
        for (i, &k) in ks.iter().enumerate() {
            if (report.recall[i], report.ndcg[i]) != oracle_metrics(&ranks, k) {
                return Err(format!("evaluator instance {inst} K = {k} differs"));
            }
        }
    }
    Ok("200 tie-heavy instances and 10 evaluator runs match exactly".into())
}

fn memorization() -> Outcome {
    let start = Instant::now();
    let data = common::chain_data(0);
    let cfg = TrainConfig {
        max_epochs: 100,
        ..common::desk_config()
    };
    let out = fit::<f32>(&data, &cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        out.best_valid >= 0.9 && secs < 600.0,
        format!(
            "best valid recall@20 {:.3} at epoch {} of {}, {secs:.1}s",
            out.best_valid,
            out.best_epoch,
            out.log.len()
        ),
    )
}

fn ablation_direction() -> Outcome {
    let data = common::shuffled_data(0);
    // Test hits per variant summed over seeds, so the sign of the mean gap
    // is decided exactly rather than by floating-point summation order.
    let mut hits = HashMap::new();
    let mut users = 0;
    let mut detail = Vec::new();
    for seed in 0..5u64 {
        let mut recall = HashMap::new();
        for variant in [Variant::Full, Variant::NoContrastive] {
            let cfg = TrainConfig {
                seed,
                variant,
                max_epochs: 100,
                ..common::desk_config()
            };
            let out = fit::<f32>(&data, &cfg).map_err(|e| e.to_string())?;
            let report = evaluate(&out.best, &data, Holdout::Test, &[20]).unwrap();
            let r = report.recall[0];
            *hits.entry(variant).or_insert(0i64) += (r * report.users as f64).round() as i64;
            if variant == Variant::Full {
                users += report.users;
            }
            recall.insert(variant, r);
        }
        detail.push(format!("{:.3}/{:.3}", recall[&Variant::Full], recall[&Variant::NoContrastive]));
    }
    let gap = hits[&Variant::Full] - hits[&Variant::NoContrastive];
    check(
        gap >= 0,
        format!(
            "mean test recall@20 gap full - PDMRec1 = {:+.4} (full/PDMRec1 per seed: {})",
            gap as f64 / users as f64,
            detail.join(", ")
        ),
    )
}

fn augmentation_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sorted = |v: &[usize]| {
        let mut v = v.to_vec();
        v.sort_unstable();
        v
    };
    for n in 0..10_000 {
        let len = rng.random_range(0..=50);
        let seq: Vec<usize> = (0..len).map(|_| rng.random_range(1..=100)).collect();
        let (alpha, gamma, eta) = (
            rng.random_range(0.0..=1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        );
        let r = reorder(&seq, alpha, &mut rng);
        if r.len() != len || sorted(&r) != sorted(&seq) {
            return Err(format!("sequence {n}: reorder changed the multiset"));
        }
        let m = mask_items(&seq, gamma, 0, &mut rng);
        let masked = m.iter().filter(|&&v| v == 0).count();
        if m.len() != len || masked != window_len(gamma, len) {
            return Err(format!("sequence {n}: mask count {masked} for gamma {gamma}"));
        }
        if m.iter().zip(&seq).any(|(a, b)| *a != 0 && a != b) {
            return Err(format!("sequence {n}: mask touched an unmasked slot"));
        }
        let c = crop_items(&seq, eta, &mut rng);
        if c.len() != len - window_len(eta, len) {
            return Err(format!("sequence {n}: crop length {} for eta {eta}", c.len()));
        }
        if reorder(&seq, 0.0, &mut rng) != seq
            || mask_items(&seq, 0.0, 0, &mut rng) != seq
            || crop_items(&seq, 0.0, &mut rng) != seq
        {
            return Err(format!("sequence {n}: zero proportion is not the identity"));
        }
    }
    Ok("10000 sequences".into())
}

fn reproducibility() -> Outcome {
    let data = common::chain_data(4);
    let cfg = TrainConfig {
        max_epochs: 5,
        batch_size: 64,
        ..common::desk_config()
    };
    let run = || -> Result<(Vec<u8>, Vec<u8>, String), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = fit_to_dir(&data, &cfg, dir.path()).map_err(|e| e.to_string())?;
        let best = std::fs::read(dir.path().join("best.ckpt")).map_err(|e| e.to_string())?;
        let last = std::fs::read(dir.path().join("last.ckpt")).map_err(|e| e.to_string())?;
        let report = evaluate(&out.best, &data, Holdout::Test, &cfg.eval_ks).map_err(|e| e.to_string())?;
        Ok((best, last, report.metrics_text()))
    };
    let a = run()?;
    let b = run()?;
    check(
        a == b,
        format!("checkpoints {} + {} bytes and report identical across runs", a.0.len(), a.1.len()),
    )
}

/// Naive k-core: remove every under-supported record, recount, repeat.
fn k_core_oracle(records: &[InteractionRecord], k: usize) -> Vec<InteractionRecord> {
    let mut cur = records.to_vec();
    loop {
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for r in &cur {
            *users.entry(&r.user_id).or_default() += 1;
            *items.entry(&r.item_id).or_default() += 1;
        }
        let next: Vec<InteractionRecord> = cur
            .iter()
            .filter(|r| users[r.user_id.as_str()] >= k && items[r.item_id.as_str()] >= k)
            .cloned()
            .collect();
        if next.len() == cur.len() {
            return next;
        }
        cur = next;
    }
}

fn pipeline_fidelity() -> Outcome {
    let log = generate_synthetic(&SyntheticConfig {
        users: 1000,
        items: 400,
        clusters: 8,
        min_len: 2,
        max_len: 30,
        purity: 0.7,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let positive = filter_positive(&log, &FilterRule::preset("any-flag").unwrap());
    let (sequences, items) = build_sequences(&positive);
    let split = leave_one_out_split(&sequences, items);
    if split.num_users() != sequences.len() {
        return Err("user count changed by the split".into());
    }
    for (u, s) in split.users.iter().zip(&sequences) {
        if u.full_sequence() != s.items || u.train.len() + 2 != s.items.len() {
            return Err(format!("user {} does not reconstruct", u.user_id));
        }
    }

    // k-core on a sparse log where pruning cascades.
    let sparse = generate_synthetic(&SyntheticConfig {
        users: 1000,
        items: 500,
        clusters: 10,
        min_len: 1,
        max_len: 12,
        purity: 0.5,
        seed: 22,
        ..Default::default()
    })
    .unwrap();
    let pruned = k_core_prune(&sparse, 5);
    let oracle = k_core_oracle(&sparse, 5);
    check(
        pruned == oracle && !pruned.is_empty() && pruned.len() < sparse.len(),
        format!(
            "{} users reconstruct; 5-core keeps {} of {} records, equal to oracle",
            split.num_users(),
            pruned.len(),
            sparse.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient fidelity", gradient_fidelity),
        ("concat-of-sums identity", decomposition_identity),
        ("positional separation", positional_separation),
        ("contrastive disentanglement", contrastive_disentanglement),
        ("metric oracle equivalence", metric_oracle),
        ("memorization", memorization),
        ("ablation direction", ablation_direction),
        ("augmentation invariants", augmentation_invariants),
        ("reproducibility", reproducibility),
        ("pipeline fidelity", pipeline_fidelity),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let id = (n + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|w| *w == id || name.contains(w.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS  {id:>2} {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {id:>2} {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
