//! Seeded synthetic interaction logs with latent interest clusters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::InteractionRecord;
use crate::error::{Error, Result};

/// How a user's items are ordered in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    /// Items sampled from the user's interest and emitted in random order;
    /// preference carries no order information.
    Shuffled,
    /// Items walk the user's cluster ring from a random start, so the next
    /// item is a deterministic function of the current one.
    Chain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub users: usize,
    pub items: usize,
    pub clusters: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a shuffled-mode draw comes from the user's own cluster.
    pub purity: f64,
    pub ordering: Ordering,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            users: 200,
            items: 100,
            clusters: 4,
            min_len: 5,
            max_len: 20,
            purity: 0.9,
            ordering: Ordering::Shuffled,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.users == 0 || self.items == 0 || self.clusters == 0 || self.min_len == 0 {
            return Err(Error::Config("synthetic counts must be at least 1".into()));
        }
        if self.clusters > self.items {
            return Err(Error::Config("more clusters than items".into()));
        }
        if self.min_len > self.max_len {
            return Err(Error::Config("min_len exceeds max_len".into()));
        }
        if !(0.0..=1.0).contains(&self.purity) {
            return Err(Error::Config("purity outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Contiguous block of raw item numbers belonging to `cluster`.
    pub fn cluster_items(&self, cluster: usize) -> std::ops::Range<usize> {
        let lo = cluster * self.items / self.clusters;
        let hi = (cluster + 1) * self.items / self.clusters;
        lo..hi
    }

    pub fn cluster_of(&self, item: usize) -> usize {
        (0..self.clusters)
            .find(|&c| self.cluster_items(c).contains(&item))
            .expect("item in range")
    }
}

pub fn item_name(k: usize) -> String {
    format!("i{k}")
}

pub fn user_name(n: usize) -> String {
    format!("u{n}")
}

/// Generates a log where every record passes all built-in filter presets.
/// User `n` belongs to cluster `n % clusters`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<InteractionRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::new();
    for user in 0..cfg.users {
        let cluster = user % cfg.clusters;
        let pool: Vec<usize> = cfg.cluster_items(cluster).collect();
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        let items = match cfg.ordering {
            Ordering::Chain => {
                let start = rng.random_range(0..pool.len());
                (0..len.min(pool.len()))
                    .map(|k| pool[(start + k) % pool.len()])
                    .collect()
            }
            Ordering::Shuffled => {
                let mut chosen: Vec<usize> = Vec::with_capacity(len);
                let mut own = pool.clone();
                own.shuffle(&mut rng);
                while chosen.len() < len.min(cfg.items) {
                    let item = if rng.random_bool(cfg.purity) && !own.is_empty() {
                        own.pop().unwrap()
                    } else {
                        rng.random_range(0..cfg.items)
                    };
                    if !chosen.contains(&item) {
                        own.retain(|&i| i != item);
                        chosen.push(item);
                    }
                }
                chosen.shuffle(&mut rng);
                chosen
            }
        };
        for (t, item) in items.into_iter().enumerate() {
            log.push(
                InteractionRecord::new(user_name(user), item_name(item), (user * 100_000 + t) as i64)
                    .with_watch_time(60.0)
                    .with_loop_times(2.0)
                    .with_flag("like"),
            );
        }
    }
    Ok(log)
}
