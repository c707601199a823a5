use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::step::{new_adam, train_step, training_cases, LossParts, Objective};
use crate::data::{Holdout, SplitDataset};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{checkpoint, Model, ModelParams};
use crate::numerics::{AdamState, Real};

pub const LOG_HEADER: &str = "epoch,l_main,l_cl,l_total,val_recall,elapsed_secs";

/// One row of the training log. Losses are means over the epoch's batches.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_main: f64,
    pub l_cl: f64,
    pub l_total: f64,
    pub val_recall: f64,
    pub elapsed_secs: f64,
}

impl EpochRecord {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.3}",
            self.epoch, self.l_main, self.l_cl, self.l_total, self.val_recall, self.elapsed_secs
        )
    }
}

/// Mutable state carried between epochs.
#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub epoch: usize,
    pub best_valid: f64,
    pub best_epoch: usize,
    pub since_improvement: usize,
    pub rng: ChaCha8Rng,
    pub adam: AdamState<T>,
    pub best: ModelParams<T>,
}

impl<T: Real> TrainState<T> {
    pub fn new(cfg: &TrainConfig, model: &Model<T>, rng: ChaCha8Rng) -> Self {
        Self {
            epoch: 0,
            best_valid: f64::NEG_INFINITY,
            best_epoch: 0,
            since_improvement: 0,
            rng,
            adam: new_adam(cfg, &model.params),
            best: model.params.clone(),
        }
    }

    /// Records a validation score; returns true on strict improvement.
    pub fn observe(&mut self, valid: f64, params: &ModelParams<T>) -> bool {
        if valid > self.best_valid {
            self.best_valid = valid;
            self.best_epoch = self.epoch;
            self.since_improvement = 0;
            self.best = params.clone();
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }

    /// A patience of zero still allows one non-improving epoch to be seen.
    pub fn should_stop(&self, patience: usize) -> bool {
        self.since_improvement >= patience.max(1)
    }
}

pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best validation recall.
    pub best: Model<T>,
    pub last: Model<T>,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid: f64,
    pub stopped_early: bool,
}

/// Trains until validation recall stops improving for `patience` epochs or
/// `max_epochs` is reached. `on_epoch` sees every log row as it is produced.
pub fn fit_with<T: Real>(
    data: &SplitDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if data.num_users() == 0 || data.num_items() == 0 {
        return Err(Error::Data("dataset is empty".into()));
    }
    let cases = training_cases(data);
    if cases.is_empty() {
        return Err(Error::Data("no user has at least two training items".into()));
    }
    let e = cfg.effective();
    let mut rng = ChaCha8Rng::seed_from_u64(e.seed);
    let mut model = Model::<T>::new(cfg.model_config(data.num_items()), &mut rng)?;
    let objective = Objective::from_config(cfg, &model.config);
    let mut state = TrainState::new(cfg, &model, rng);
    let mut log = Vec::new();
    let start = Instant::now();
    let mut order: Vec<usize> = (0..cases.len()).collect();
    let mut stopped_early = false;

    while state.epoch < e.max_epochs {
        state.epoch += 1;
        order.shuffle(&mut state.rng);
        let mut sum = LossParts::<f64>::default();
        let mut steps = 0usize;
        for chunk in order.chunks(e.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| cases[i].clone()).collect();
            let p = train_step(&mut model, &mut state.adam, &objective, &batch, &mut state.rng);
            sum.main += p.main.as_f64();
            sum.contrastive += p.contrastive.as_f64();
            sum.total += p.total.as_f64();
            steps += 1;
        }
        let n = steps as f64;
        let valid = evaluate(&model, data, Holdout::Valid, &[e.valid_k])?.recall[0];
        let improved = state.observe(valid, &model.params);
        let record = EpochRecord {
            epoch: state.epoch,
            l_main: sum.main / n,
            l_cl: sum.contrastive / n,
            l_total: sum.total / n,
            val_recall: valid,
            elapsed_secs: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {:>3}  main {:.4}  cl {:.4}  total {:.4}  val recall@{} {:.4}{}",
            record.epoch,
            record.l_main,
            record.l_cl,
            record.l_total,
            e.valid_k,
            valid,
            if improved { "  *" } else { "" }
        );
        on_epoch(&record);
        log.push(record);
        if state.should_stop(e.patience) {
            stopped_early = true;
            break;
        }
    }
    let best = Model::from_parts(model.config.clone(), state.best)?;
    Ok(TrainOutcome {
        best,
        last: model,
        log,
        best_epoch: state.best_epoch,
        best_valid: state.best_valid,
        stopped_early,
    })
}

pub fn fit<T: Real>(data: &SplitDataset, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    fit_with(data, cfg, |_| {})
}

/// Runs [`fit`] and writes `config.txt`, `train_log.csv`, `best.ckpt` and
/// `last.ckpt` under `out`. The log is flushed after every epoch.
pub fn fit_to_dir(data: &SplitDataset, cfg: &TrainConfig, out: &Path) -> Result<TrainOutcome<f32>> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.txt"), cfg.to_text())?;
    let mut csv = fs::File::create(out.join("train_log.csv"))?;
    writeln!(csv, "{LOG_HEADER}")?;
    let mut io_error = None;
    let outcome = fit_with::<f32>(data, cfg, |r| {
        if io_error.is_none() {
            io_error = writeln!(csv, "{}", r.to_csv()).and_then(|_| csv.flush()).err();
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let notes = cfg.to_text();
    fs::write(out.join("best.ckpt"), checkpoint::to_bytes(&outcome.best, &notes))?;
    fs::write(out.join("last.ckpt"), checkpoint::to_bytes(&outcome.last, &notes))?;
    Ok(outcome)
}
