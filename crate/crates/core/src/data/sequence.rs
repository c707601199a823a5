use std::collections::HashMap;
use std::str::FromStr;

use super::record::InteractionRecord;
use crate::error::Error;

/// Index reserved for padding slots.
pub const PAD: usize = 0;

/// Time-ordered positive items of one user, as dense item indices (`1..=|V|`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositiveSequence {
    pub user_index: usize,
    pub user_id: String,
    pub items: Vec<usize>,
}

/// Bijection between raw item ids and dense indices `1..=|V|`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ItemIndex {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl ItemIndex {
    pub fn from_ids(ids: Vec<String>) -> Self {
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(k, id)| (id.clone(), k + 1))
            .collect();
        Self { ids, lookup }
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&k) = self.lookup.get(id) {
            return k;
        }
        self.ids.push(id.to_string());
        let k = self.ids.len();
        self.lookup.insert(id.to_string(), k);
        k
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, raw: &str) -> Option<usize> {
        self.lookup.get(raw).copied()
    }

    pub fn raw_id(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|k| self.ids.get(k))
            .map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Minimum positive interactions a user needs to supply train, validation
/// and test items.
pub const MIN_SEQUENCE_LEN: usize = 3;

/// Groups records by user (in order of first appearance), sorts each user's
/// records by timestamp with ties kept in input order, drops users with fewer
/// than [`MIN_SEQUENCE_LEN`] records and assigns dense item indices in order of
/// first appearance among the survivors.
pub fn build_sequences(records: &[InteractionRecord]) -> (Vec<PositiveSequence>, ItemIndex) {
    let mut order: Vec<&str> = Vec::new();
    let mut per_user: HashMap<&str, Vec<&InteractionRecord>> = HashMap::new();
    for r in records {
        per_user
            .entry(&r.user_id)
            .or_insert_with(|| {
                order.push(&r.user_id);
                Vec::new()
            })
            .push(r);
    }
    let mut index = ItemIndex::default();
    let mut sequences = Vec::new();
    let mut dropped = 0usize;
    for user in order {
        let mut rs = per_user.remove(user).unwrap();
        if rs.len() < MIN_SEQUENCE_LEN {
            dropped += 1;
            continue;
        }
        rs.sort_by_key(|r| r.timestamp);
        let items = rs.iter().map(|r| index.intern(&r.item_id)).collect();
        sequences.push(PositiveSequence {
            user_index: sequences.len(),
            user_id: user.to_string(),
            items,
        });
    }
    if dropped > 0 {
        log::info!("dropped {dropped} users with fewer than {MIN_SEQUENCE_LEN} interactions");
    }
    (sequences, index)
}

/// Where padding goes when a sequence is shorter than the model length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PadSide {
    /// Zeros first; the latest item sits in the final slot.
    #[default]
    Left,
    /// Zeros after the items.
    Right,
}

impl FromStr for PadSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "left" => Ok(PadSide::Left),
            "right" => Ok(PadSide::Right),
            _ => Err(Error::Config(format!("pad side `{s}`: expected left|right"))),
        }
    }
}

impl std::fmt::Display for PadSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PadSide::Left => "left",
            PadSide::Right => "right",
        })
    }
}

/// Latest `len` items, padded with [`PAD`] to exactly `len` slots.
pub fn to_fixed_length(items: &[usize], len: usize, side: PadSide) -> Vec<usize> {
    assert!(len >= 1, "sequence length must be positive");
    let tail = &items[items.len().saturating_sub(len)..];
    let pad = len - tail.len();
    let mut out = Vec::with_capacity(len);
    match side {
        PadSide::Left => {
            out.resize(pad, PAD);
            out.extend_from_slice(tail);
        }
        PadSide::Right => {
            out.extend_from_slice(tail);
            out.resize(len, PAD);
        }
    }
    out
}
