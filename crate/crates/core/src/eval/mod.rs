//! Whole-catalog ranking metrics, evaluation reports and parameter counts.

use std::collections::HashSet;
use std::time::Instant;

use crate::data::{Holdout, SplitDataset};
use crate::error::{Error, Result};
use crate::kv;
use crate::model::{shapes, Model, ModelConfig};
use crate::numerics::Real;

pub const DEFAULT_KS: [usize; 3] = [20, 50, 100];

/// 1-based rank of `target` among `scores` (entry `i - 1` scores item `i`),
/// skipping `excluded`. Ties count against the target.
pub fn rank_of<T: Real>(scores: &[T], target: usize, excluded: &HashSet<usize>) -> usize {
    let s = scores[target - 1];
    1 + scores
        .iter()
        .enumerate()
        .map(|(j, &v)| (j + 1, v))
        .filter(|&(item, v)| item != target && !excluded.contains(&item) && v >= s)
        .count()
}

/// Rank of `target` for a user whose eval-mode representation is computed
/// from `history`.
pub fn rank_user<T: Real>(
    model: &Model<T>,
    history: &[usize],
    target: usize,
    excluded: &HashSet<usize>,
) -> Result<usize> {
    if target == 0 || target > model.config.num_items {
        return Err(Error::Data(format!("ground truth {target} outside the catalog")));
    }
    if excluded.contains(&target) {
        return Err(Error::Data(format!("ground truth {target} is in the excluded set")));
    }
    let h = model.user_vector(history)?;
    Ok(rank_of(&model.score_all(&h), target, excluded))
}

pub fn recall_at_k(ranks: &[usize], k: usize) -> f64 {
    assert!(k >= 1, "k must be positive");
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

pub fn ndcg_at_k(ranks: &[usize], k: usize) -> f64 {
    assert!(k >= 1, "k must be positive");
    if ranks.is_empty() {
        return 0.0;
    }
    let gain: f64 = ranks
        .iter()
        .filter(|&&r| r <= k)
        .map(|&r| 1.0 / ((r + 1) as f64).log2())
        .fold(0.0, |a, b| a + b);
    gain / ranks.len() as f64
}

/// Ranks of every user's `holdout` item, in user order.
pub fn ranks<T: Real>(model: &Model<T>, data: &SplitDataset, holdout: Holdout) -> Result<Vec<usize>> {
    (0..data.num_users())
        .map(|u| {
            let (history, target) = data.case(u, holdout);
            rank_user(model, &history, target, &data.excluded(u, holdout))
        })
        .collect()
}

/// Outcome of one evaluation run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub holdout: String,
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub users: usize,
    pub mean_rank: f64,
    /// Model configuration the numbers were produced with.
    pub config: ModelConfig,
    pub wall_clock_secs: f64,
}

impl EvalReport {
    pub fn from_ranks(
        ranks: &[usize],
        ks: &[usize],
        holdout: Holdout,
        config: ModelConfig,
        wall_clock_secs: f64,
    ) -> Self {
        let mean_rank = if ranks.is_empty() {
            0.0
        } else {
            ranks.iter().sum::<usize>() as f64 / ranks.len() as f64
        };
        Self {
            holdout: holdout.name().to_string(),
            ks: ks.to_vec(),
            recall: ks.iter().map(|&k| recall_at_k(ranks, k)).collect(),
            ndcg: ks.iter().map(|&k| ndcg_at_k(ranks, k)).collect(),
            users: ranks.len(),
            mean_rank,
            config,
            wall_clock_secs,
        }
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.ndcg[i])
    }

    /// Every field except the wall-clock time, in a stable order.
    pub fn metrics_text(&self) -> String {
        let mut s = String::new();
        kv::line(&mut s, "holdout", &self.holdout);
        kv::line(&mut s, "users", self.users);
        let ks: Vec<String> = self.ks.iter().map(usize::to_string).collect();
        kv::line(&mut s, "ks", ks.join(","));
        for (i, k) in self.ks.iter().enumerate() {
            kv::line(&mut s, &format!("recall@{k}"), self.recall[i]);
            kv::line(&mut s, &format!("ndcg@{k}"), self.ndcg[i]);
        }
        kv::line(&mut s, "mean_rank", self.mean_rank);
        for line in self.config.to_text().lines() {
            s.push_str("config.");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = self.metrics_text();
        kv::line(&mut s, "wall_clock_secs", self.wall_clock_secs);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut holdout = None;
        let mut users = None;
        let mut ks: Option<Vec<usize>> = None;
        let mut recall = Vec::new();
        let mut ndcg = Vec::new();
        let mut mean_rank = None;
        let mut config = String::new();
        let mut wall = 0.0;
        for (k, v) in kv::parse_lines(text)? {
            if let Some(key) = k.strip_prefix("config.") {
                kv::line(&mut config, key, &v);
            } else if let Some(at) = k.strip_prefix("recall@") {
                recall.push((kv::parse_value::<usize>(&k, at)?, kv::parse_value::<f64>(&k, &v)?));
            } else if let Some(at) = k.strip_prefix("ndcg@") {
                ndcg.push((kv::parse_value::<usize>(&k, at)?, kv::parse_value::<f64>(&k, &v)?));
            } else {
                match k.as_str() {
                    "holdout" => holdout = Some(v),
                    "users" => users = Some(kv::parse_value(&k, &v)?),
                    "ks" => {
                        ks = Some(
                            v.split(',')
                                .map(|x| kv::parse_value(&k, x.trim()))
                                .collect::<Result<_>>()?,
                        )
                    }
                    "mean_rank" => mean_rank = Some(kv::parse_value(&k, &v)?),
                    "wall_clock_secs" => wall = kv::parse_value(&k, &v)?,
                    other => return Err(Error::Format(format!("unknown report key `{other}`"))),
                }
            }
        }
        let missing = |f: &str| Error::Format(format!("report lacks `{f}`"));
        let ks = ks.ok_or_else(|| missing("ks"))?;
        let pick = |pairs: &[(usize, f64)], name: &str| -> Result<Vec<f64>> {
            ks.iter()
                .map(|k| {
                    pairs
                        .iter()
                        .find(|(x, _)| x == k)
                        .map(|&(_, v)| v)
                        .ok_or_else(|| missing(&format!("{name}@{k}")))
                })
                .collect()
        };
        Ok(Self {
            recall: pick(&recall, "recall")?,
            ndcg: pick(&ndcg, "ndcg")?,
            holdout: holdout.ok_or_else(|| missing("holdout"))?,
            users: users.ok_or_else(|| missing("users"))?,
            mean_rank: mean_rank.ok_or_else(|| missing("mean_rank"))?,
            config: ModelConfig::from_text(&config)?,
            ks,
            wall_clock_secs: wall,
        })
    }
}

/// Ranks every user's `holdout` item against the whole catalog.
pub fn evaluate<T: Real>(
    model: &Model<T>,
    data: &SplitDataset,
    holdout: Holdout,
    ks: &[usize],
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("cutoffs must be positive and non-empty".into()));
    }
    if data.num_items() != model.config.num_items {
        return Err(Error::Data(format!(
            "dataset has {} items, model was built for {}",
            data.num_items(),
            model.config.num_items
        )));
    }
    let start = Instant::now();
    let r = ranks(model, data, holdout)?;
    Ok(EvalReport::from_ranks(
        &r,
        ks,
        holdout,
        model.config.clone(),
        start.elapsed().as_secs_f64(),
    ))
}

/// Learnable scalar counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterCount {
    /// `(name, rows, cols)` in canonical order.
    pub tensors: Vec<(String, usize, usize)>,
    pub total: usize,
    pub item_embeddings: usize,
    pub positional_embeddings: usize,
}

pub fn count_parameters(config: &ModelConfig) -> ParameterCount {
    let s = shapes(config);
    let tensors: Vec<(String, usize, usize)> = s
        .entries()
        .into_iter()
        .map(|(n, &(r, c))| (n, r, c))
        .collect();
    ParameterCount {
        total: tensors.iter().map(|(_, r, c)| r * c).sum(),
        item_embeddings: s.item_embeddings.0 * s.item_embeddings.1,
        positional_embeddings: s.positional.map_or(0, |(r, c)| r * c),
        tensors,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::PositionalMode;

    fn sort_oracle(scores: &[f64], target: usize, excluded: &HashSet<usize>) -> usize {
        let mut cands: Vec<(f64, bool)> = (1..=scores.len())
            .filter(|i| !excluded.contains(i))
            .map(|i| (scores[i - 1], i == target))
            .collect();
        // descending score; within ties the target goes last
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        1 + cands.iter().position(|c| c.1).unwrap()
    }

    #[test]
    fn rank_examples() {
        let none = HashSet::new();
        assert_eq!(rank_of(&[0.1, 0.9, 0.3], 2, &none), 1);
        assert_eq!(rank_of(&[1.0f64; 10], 4, &none), 10);
        let scores = [0.5, 0.9, 0.1, 0.7, 0.7, 0.2, 0.8, 0.3];
        let excluded: HashSet<usize> = [2, 7].into();
        for t in [1, 3, 4, 5, 6, 8] {
            assert_eq!(rank_of(&scores, t, &excluded), sort_oracle(&scores, t, &excluded));
        }
        assert_eq!(rank_of(&scores, 4, &excluded), 2);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(recall_at_k(&[1, 1, 1], 20), 1.0);
        assert_eq!(recall_at_k(&[1, 21], 20), 0.5);
        assert_eq!(ndcg_at_k(&[1], 20), 1.0);
        assert!((ndcg_at_k(&[3], 20) - 0.5).abs() < 1e-15);
        assert_eq!(ndcg_at_k(&[21], 20), 0.0);
    }

    proptest! {
        #[test]
        fn rank_matches_sort_oracle(seed in any::<u64>(), n in 2usize..300, levels in 1u32..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
            let target = rng.random_range(1..=n);
            let excluded: HashSet<usize> = (1..=n)
                .filter(|&i| i != target && rng.random_bool(0.2))
                .collect();
            prop_assert_eq!(rank_of(&scores, target, &excluded), sort_oracle(&scores, target, &excluded));
        }

        #[test]
        fn metric_invariants(ranks in prop::collection::vec(1usize..200, 1..50)) {
            let mut prev = 0.0;
            for k in DEFAULT_KS {
                let r = recall_at_k(&ranks, k);
                let n = ndcg_at_k(&ranks, k);
                prop_assert!((0.0..=1.0).contains(&r));
                prop_assert!(n <= r + 1e-15);
                prop_assert!(r >= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn report_round_trip() {
        let cfg = ModelConfig {
            num_items: 40,
            ..Default::default()
        };
        let r = EvalReport::from_ranks(&[1, 3, 60, 7, 120], &DEFAULT_KS, Holdout::Test, cfg, 0.125);
        let back = EvalReport::from_text(&r.to_text()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_text(), r.to_text());
        assert_eq!(r.recall_at(50), Some(0.6));
        assert!(!r.metrics_text().contains("wall_clock"));
    }

    #[test]
    fn parameter_count_matches_shape_walk() {
        let cfg = ModelConfig {
            num_items: 50,
            max_len: 100,
            dim: 64,
            heads: 2,
            blocks: 2,
            mlp_inner: 64,
            ..Default::default()
        };
        let c = count_parameters(&cfg);
        assert_eq!(c.positional_embeddings, 6_400);
        assert_eq!(c.item_embeddings, 51 * 64);
        let d = 64;
        let per_block = 3 * d * d + 2 * d * d + (d * 64 + 64) + (64 * d + d) + 2 * d;
        assert_eq!(c.total, 51 * d + 100 * d + 2 * per_block);
        let p = crate::model::ModelParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(c.total, p.num_scalars());

        let absent = ModelConfig {
            positional: PositionalMode::Absent,
            ..cfg
        };
        let a = count_parameters(&absent);
        assert_eq!(a.positional_embeddings, 0);
        assert_eq!(a.total, 51 * d + 2 * (per_block - 2 * d * d));
    }
}
