use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{ops, CeTerm, Real, Tape, Var};

/// Which rows of a contrastive batch act as anchors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Direction {
    /// Every row is an anchor; its partner is the positive.
    #[default]
    Symmetric,
    /// Only the first view of each pair (even rows) is an anchor.
    Forward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Symmetric => "symmetric",
            Direction::Forward => "forward",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Direction::Symmetric),
            "forward" => Ok(Direction::Forward),
            _ => Err(Error::Config(format!("unknown contrastive direction `{s}`"))),
        }
    }
}

/// Cross-entropy terms over a `2M × 2M` similarity matrix: row `i` targets
/// its partner `i ^ 1` and never sees itself.
fn terms(rows: usize, direction: Direction) -> Vec<CeTerm> {
    let step = match direction {
        Direction::Symmetric => 1,
        Direction::Forward => 2,
    };
    (0..rows)
        .step_by(step)
        .map(|i| CeTerm {
            row: i,
            target: i ^ 1,
            excluded: Some(i),
        })
        .collect()
}

/// Reordering sequence loss on the tape. `views` are `1 × D` rows ordered
/// so that `2k` and `2k + 1` come from the same source sequence. Returns
/// `None` when fewer than two pairs leave no negatives.
pub fn reordering_loss_on_tape<T: Real>(
    tape: &mut Tape<'_, T>,
    views: &[Var],
    direction: Direction,
) -> Option<Var> {
    assert!(views.len().is_multiple_of(2), "contrastive views come in pairs");
    if views.len() < 4 {
        log::warn!(
            "contrastive batch has {} pair(s); need at least 2 for negatives, skipping",
            views.len() / 2
        );
        return None;
    }
    let z = tape.concat_rows(views);
    let sims = tape.matmul_nt(z, z);
    Some(tape.cross_entropy(sims, &terms(views.len(), direction)))
}

/// Reordering sequence loss evaluated directly. All views must share one
/// length; fewer than two pairs contribute zero.
pub fn reordering_sequence_loss<T: Real>(views: &[Vec<T>], direction: Direction) -> Result<T> {
    if !views.len().is_multiple_of(2) {
        return Err(Error::dim("reordering_sequence_loss", "odd number of views"));
    }
    if let Some(v) = views.iter().find(|v| v.len() != views[0].len()) {
        return Err(Error::dim(
            "reordering_sequence_loss",
            format!("view lengths {} and {} differ", views[0].len(), v.len()),
        ));
    }
    if views.len() < 4 {
        log::warn!("contrastive batch has fewer than 2 pairs, loss is zero");
        return Ok(T::zero());
    }
    let ts = terms(views.len(), direction);
    let mut total = T::zero();
    for t in &ts {
        let sims: Vec<T> = views.iter().map(|v| ops::dot(&views[t.row], v)).collect();
        let max = sims
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != t.row)
            .map(|(_, &s)| s)
            .fold(T::neg_infinity(), T::max);
        let denom: T = sims
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != t.row)
            .map(|(_, &s)| (s - max).exp())
            .sum();
        total = total + (denom.ln() + max - sims[t.target]);
    }
    Ok(total / T::from_usize(ts.len()).unwrap())
}
