use rand::Rng;

use super::config::TrainConfig;
use crate::contrastive::{reordering_loss_on_tape, view_on_tape, Augmenter, Direction, Representation};
use crate::data::SplitDataset;
use crate::model::{encode_on_tape, last_real_slot, Model, ModelConfig, ModelParams, PassOptions};
use crate::numerics::{AdamState, CeTerm, Matrix, Real, Tape, Var};

/// One next-item example: the items before `target`, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainCase {
    pub prefix: Vec<usize>,
    pub target: usize,
}

/// One case per user: the training sequence minus its last item, predicting
/// that item. Users with fewer than two training items are skipped.
pub fn training_cases(data: &SplitDataset) -> Vec<TrainCase> {
    data.users
        .iter()
        .filter(|u| u.train.len() >= 2)
        .map(|u| TrainCase {
            prefix: u.train[..u.train.len() - 1].to_vec(),
            target: u.train[u.train.len() - 1],
        })
        .collect()
}

/// Scalar loss components of one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts<T> {
    pub main: T,
    /// Zero when the contrastive term is disabled or the batch is too small.
    pub contrastive: T,
    pub total: T,
}

/// Loss settings that do not live in [`ModelConfig`].
#[derive(Clone, Copy, Debug)]
pub struct Objective {
    pub lambda: f64,
    pub augmenter: Augmenter,
    pub representation: Representation,
    pub direction: Direction,
}

impl Objective {
    pub fn from_config(cfg: &TrainConfig, model: &ModelConfig) -> Self {
        let e = cfg.effective();
        Self {
            lambda: e.lambda,
            augmenter: cfg.augmenter(model),
            representation: e.representation,
            direction: e.direction,
        }
    }
}

/// Tape handles of one batch's losses.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub main: Var,
    pub contrastive: Option<Var>,
    pub total: Var,
}

/// Mean full-softmax next-item loss over `(user vector, target)` rows. The
/// padding row and any mask-token row of the table are not candidates.
pub fn main_loss_on_tape<T: Real>(
    tape: &mut Tape<'_, T>,
    item_table: Var,
    num_items: usize,
    user_vectors: Var,
    targets: &[usize],
) -> Var {
    let catalog = tape.slice_rows(item_table, 1, num_items);
    let logits = tape.matmul_nt(user_vectors, catalog);
    let terms: Vec<CeTerm> = targets
        .iter()
        .enumerate()
        .map(|(row, &t)| {
            assert!((1..=num_items).contains(&t), "target outside the catalog");
            CeTerm {
                row,
                target: t - 1,
                excluded: None,
            }
        })
        .collect();
    tape.cross_entropy(logits, &terms)
}

/// `−log softmax(h · Eᵀ)[target]` over items `1..=|V|`, evaluated directly.
pub fn main_loss<T: Real>(model: &Model<T>, user_vector: &[T], target: usize) -> T {
    let mut tape = Tape::new();
    let table = tape.param(&model.params.item_embeddings);
    let h = tape.constant(Matrix::row_vector(user_vector.to_vec()));
    let l = main_loss_on_tape(&mut tape, table, model.config.num_items, h, &[target]);
    tape.scalar(l)
}

/// Records the total objective for `batch` on `tape`. Every random draw
/// (dropout and augmentation) comes from `rng` in a fixed order.
pub fn batch_loss_on_tape<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<'_, T>,
    cfg: &ModelConfig,
    objective: &Objective,
    vars: &crate::model::ModelTensors<Var>,
    batch: &[TrainCase],
    rng: &mut R,
) -> LossVars {
    let mut rows = Vec::with_capacity(batch.len());
    for case in batch {
        let slots = crate::data::to_fixed_length(&case.prefix, cfg.max_len, cfg.pad_side);
        let trace = encode_on_tape(tape, cfg, vars, &slots, PassOptions::TRAIN, rng);
        rows.push(tape.select_row(trace.hidden, last_real_slot(&slots)));
    }
    let h = tape.concat_rows(&rows);
    let targets: Vec<usize> = batch.iter().map(|c| c.target).collect();
    let main = main_loss_on_tape(tape, vars.item_embeddings, cfg.num_items, h, &targets);

    let contrastive = if objective.lambda != 0.0 {
        let mut views = Vec::with_capacity(2 * batch.len());
        for case in batch {
            let (a, b) = objective.augmenter.pair(&case.prefix, rng);
            for view in [a, b] {
                let slots = crate::data::to_fixed_length(&view, cfg.max_len, cfg.pad_side);
                views.push(view_on_tape(
                    tape,
                    cfg,
                    vars,
                    &slots,
                    objective.representation,
                    true,
                    rng,
                ));
            }
        }
        reordering_loss_on_tape(tape, &views, objective.direction)
    } else {
        None
    };
    let total = match contrastive {
        Some(cl) => {
            let scaled = tape.scale(cl, T::from_f64_lossy(objective.lambda));
            tape.add(main, scaled)
        }
        None => main,
    };
    LossVars {
        main,
        contrastive,
        total,
    }
}

/// Loss components and the gradient of the total with respect to every
/// parameter, in canonical tensor order.
pub fn compute_loss_and_grads<T: Real, R: Rng + ?Sized>(
    model: &Model<T>,
    objective: &Objective,
    batch: &[TrainCase],
    rng: &mut R,
) -> (LossParts<T>, Vec<Matrix<T>>) {
    let mut tape = Tape::new();
    let vars = model.params.bind(&mut tape);
    let loss = batch_loss_on_tape(&mut tape, &model.config, objective, &vars, batch, rng);
    let parts = LossParts {
        main: tape.scalar(loss.main),
        contrastive: loss.contrastive.map_or(T::zero(), |c| tape.scalar(c)),
        total: tape.scalar(loss.total),
    };
    let grads = tape.backward(loss.total);
    let shapes = model.params.entries();
    let out = vars
        .entries()
        .into_iter()
        .zip(shapes)
        .map(|((_, &v), (_, m))| grads.get_or_zeros(v, m.shape()))
        .collect();
    (parts, out)
}

/// Gradient of only the contrastive term, in canonical tensor order, or
/// `None` if the batch produces no contrastive loss.
pub fn contrastive_grads<T: Real, R: Rng + ?Sized>(
    model: &Model<T>,
    objective: &Objective,
    batch: &[TrainCase],
    rng: &mut R,
) -> Option<Vec<(String, Matrix<T>)>> {
    let mut tape = Tape::new();
    let vars = model.params.bind(&mut tape);
    let loss = batch_loss_on_tape(&mut tape, &model.config, objective, &vars, batch, rng);
    let cl = loss.contrastive?;
    let grads = tape.backward(cl);
    Some(
        vars.entries()
            .into_iter()
            .zip(model.params.entries())
            .map(|((name, &v), (_, m))| (name, grads.get_or_zeros(v, m.shape())))
            .collect(),
    )
}

/// One Adam update on the batch objective.
pub fn train_step<T: Real, R: Rng + ?Sized>(
    model: &mut Model<T>,
    adam: &mut AdamState<T>,
    objective: &Objective,
    batch: &[TrainCase],
    rng: &mut R,
) -> LossParts<T> {
    let (parts, grads) = compute_loss_and_grads(model, objective, batch, rng);
    adam.step(model.params.slots_mut(), grads.iter());
    parts
}

/// Fresh optimizer state for `params`.
pub fn new_adam<T: Real>(cfg: &TrainConfig, params: &ModelParams<T>) -> AdamState<T> {
    AdamState::new(cfg.adam(), params.entries().into_iter().map(|(_, m)| m))
}
