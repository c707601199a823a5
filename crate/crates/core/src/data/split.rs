use std::collections::HashSet;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use super::sequence::{ItemIndex, PositiveSequence, MIN_SEQUENCE_LEN};
use crate::error::{Error, Result};

const SPLIT_HEADER: &str = "pdmrec-split v1";

/// Leave-one-out partition of one user's sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSplit {
    pub user_id: String,
    pub train: Vec<usize>,
    pub valid: usize,
    pub test: usize,
}

impl UserSplit {
    /// Items visible when predicting the validation item.
    pub fn valid_history(&self) -> &[usize] {
        &self.train
    }

    /// Items visible when predicting the test item.
    pub fn test_history(&self) -> Vec<usize> {
        let mut h = self.train.clone();
        h.push(self.valid);
        h
    }

    pub fn full_sequence(&self) -> Vec<usize> {
        let mut s = self.test_history();
        s.push(self.test);
        s
    }
}

/// Which held-out item an evaluation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Holdout {
    Valid,
    Test,
}

impl Holdout {
    pub fn name(self) -> &'static str {
        match self {
            Holdout::Valid => "valid",
            Holdout::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitDataset {
    pub users: Vec<UserSplit>,
    pub items: ItemIndex,
}

impl SplitDataset {
    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// `(history, target)` for one user under `holdout`.
    pub fn case(&self, user: usize, holdout: Holdout) -> (Vec<usize>, usize) {
        let u = &self.users[user];
        match holdout {
            Holdout::Valid => (u.valid_history().to_vec(), u.valid),
            Holdout::Test => (u.test_history(), u.test),
        }
    }

    /// Items the user interacted with before the `holdout` target, excluding
    /// the target itself.
    pub fn excluded(&self, user: usize, holdout: Holdout) -> HashSet<usize> {
        let (history, target) = self.case(user, holdout);
        history.into_iter().filter(|&i| i != target).collect()
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{SPLIT_HEADER}")?;
        writeln!(w, "users\t{}", self.users.len())?;
        writeln!(w, "items\t{}", self.items.len())?;
        for id in self.items.ids() {
            writeln!(w, "{id}")?;
        }
        for u in &self.users {
            let train: Vec<String> = u.train.iter().map(usize::to_string).collect();
            writeln!(w, "{}\t{}\t{}\t{}", u.user_id, train.join(" "), u.valid, u.test)?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Format(format!("split file truncated before {what}")))
        };
        let header = next("header")?;
        if header.trim() != SPLIT_HEADER {
            return Err(Error::Format(format!("unsupported split header `{header}`")));
        }
        let count = |line: String, key: &str| -> Result<usize> {
            line.strip_prefix(key)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("expected `{key}<TAB>count`, got `{line}`")))
        };
        let n_users = count(next("user count")?, "users\t")?;
        let n_items = count(next("item count")?, "items\t")?;
        let mut ids = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            ids.push(next("item ids")?);
        }
        let items = ItemIndex::from_ids(ids);
        let parse_item = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| Error::Format(format!("bad item index `{s}`")))?;
            if v == 0 || v > n_items {
                return Err(Error::Format(format!("item index {v} outside 1..={n_items}")));
            }
            Ok(v)
        };
        let mut users = Vec::with_capacity(n_users);
        for _ in 0..n_users {
            let line = next("user rows")?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::Format(format!("bad user row `{line}`")));
            }
            let train = fields[1]
                .split_whitespace()
                .map(parse_item)
                .collect::<Result<Vec<_>>>()?;
            if train.is_empty() {
                return Err(Error::Format(format!("user `{}` has no training items", fields[0])));
            }
            users.push(UserSplit {
                user_id: fields[0].to_string(),
                train,
                valid: parse_item(fields[2])?,
                test: parse_item(fields[3])?,
            });
        }
        Ok(Self { users, items })
    }

    /// Two-column `index<TAB>raw_id` map.
    pub fn write_index_map(&self, mut w: impl Write) -> Result<()> {
        for (k, id) in self.items.ids().iter().enumerate() {
            writeln!(w, "{}\t{id}", k + 1)?;
        }
        Ok(())
    }

    /// SHA-256 of the serialised dataset, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("in-memory write");
        Sha256::digest(&buf)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Last item → test, second to last → validation, rest → train. Sequences
/// shorter than three items are skipped.
pub fn leave_one_out_split(sequences: &[PositiveSequence], items: ItemIndex) -> SplitDataset {
    let mut users = Vec::with_capacity(sequences.len());
    let mut skipped = 0usize;
    for s in sequences {
        let n = s.items.len();
        if n < MIN_SEQUENCE_LEN {
            skipped += 1;
            continue;
        }
        users.push(UserSplit {
            user_id: s.user_id.clone(),
            train: s.items[..n - 2].to_vec(),
            valid: s.items[n - 2],
            test: s.items[n - 1],
        });
    }
    if skipped > 0 {
        log::warn!("leave-one-out: skipped {skipped} sequences shorter than {MIN_SEQUENCE_LEN}");
    }
    SplitDataset { users, items }
}
