use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};

/// `⌊proportion · len⌋`, tolerant of representation error in the product
/// (so `0.29 · 100` is 29, not 28).
pub fn window_len(proportion: f64, len: usize) -> usize {
    ((proportion * len as f64) + 1e-9).floor() as usize
}

/// Shuffles one contiguous window of `⌊alpha·|seq|⌋` items, starting at a
/// uniformly chosen offset. Everything outside the window is untouched.
pub fn reorder<R: Rng + ?Sized>(seq: &[usize], alpha: f64, rng: &mut R) -> Vec<usize> {
    let mut out = seq.to_vec();
    let w = window_len(alpha, seq.len()).min(seq.len());
    if w < 2 {
        return out;
    }
    let start = rng.random_range(0..=seq.len() - w);
    out[start..start + w].shuffle(rng);
    out
}

/// Replaces `⌊gamma·|seq|⌋` distinct positions with `mask_token`.
pub fn mask_items<R: Rng + ?Sized>(
    seq: &[usize],
    gamma: f64,
    mask_token: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = seq.to_vec();
    let n = window_len(gamma, seq.len()).min(seq.len());
    for pos in index::sample(rng, seq.len(), n) {
        out[pos] = mask_token;
    }
    out
}

/// Deletes one contiguous window of `⌊eta·|seq|⌋` items.
pub fn crop_items<R: Rng + ?Sized>(seq: &[usize], eta: f64, rng: &mut R) -> Vec<usize> {
    let w = window_len(eta, seq.len()).min(seq.len());
    if w == 0 {
        return seq.to_vec();
    }
    let start = rng.random_range(0..=seq.len() - w);
    let mut out = seq[..start].to_vec();
    out.extend_from_slice(&seq[start + w..]);
    out
}

/// One augmentation with its proportion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AugmentationOp {
    Reorder(f64),
    Mask(f64),
    Crop(f64),
}

impl AugmentationOp {
    pub fn validate(self) -> Result<Self> {
        let (name, p, upper_open) = match self {
            AugmentationOp::Reorder(a) => ("reorder", a, false),
            AugmentationOp::Mask(g) => ("mask", g, true),
            AugmentationOp::Crop(e) => ("crop", e, true),
        };
        let ok = if upper_open {
            (0.0..1.0).contains(&p)
        } else {
            (0.0..=1.0).contains(&p)
        };
        if !ok {
            return Err(Error::Config(format!("{name} proportion {p} out of range")));
        }
        Ok(self)
    }

    pub fn apply<R: Rng + ?Sized>(self, seq: &[usize], mask_token: Option<usize>, rng: &mut R) -> Vec<usize> {
        match self {
            AugmentationOp::Reorder(a) => reorder(seq, a, rng),
            AugmentationOp::Mask(g) => {
                mask_items(seq, g, mask_token.expect("mask augmentation needs a mask token"), rng)
            }
            AugmentationOp::Crop(e) => crop_items(seq, e, rng),
        }
    }
}

/// Which augmentation produces each contrastive view.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AugmentationKind {
    #[default]
    Reorder,
    Mask,
    Crop,
    /// Each view draws one of reorder, mask and crop uniformly.
    Mixed,
}

impl AugmentationKind {
    pub fn needs_mask_token(self) -> bool {
        matches!(self, AugmentationKind::Mask | AugmentationKind::Mixed)
    }
}

impl fmt::Display for AugmentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AugmentationKind::Reorder => "reorder",
            AugmentationKind::Mask => "mask",
            AugmentationKind::Crop => "crop",
            AugmentationKind::Mixed => "mixed",
        })
    }
}

impl FromStr for AugmentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reorder" => Ok(AugmentationKind::Reorder),
            "mask" => Ok(AugmentationKind::Mask),
            "crop" => Ok(AugmentationKind::Crop),
            "mixed" => Ok(AugmentationKind::Mixed),
            _ => Err(Error::Config(format!("unknown augmentation `{s}`"))),
        }
    }
}

/// Proportions for each augmentation plus the selection policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Augmenter {
    pub kind: AugmentationKind,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub mask_token: Option<usize>,
}

impl Augmenter {
    fn op<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentationOp {
        match self.kind {
            AugmentationKind::Reorder => AugmentationOp::Reorder(self.alpha),
            AugmentationKind::Mask => AugmentationOp::Mask(self.gamma),
            AugmentationKind::Crop => AugmentationOp::Crop(self.eta),
            AugmentationKind::Mixed => match rng.random_range(0..3) {
                0 => AugmentationOp::Reorder(self.alpha),
                1 => AugmentationOp::Mask(self.gamma),
                _ => AugmentationOp::Crop(self.eta),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        AugmentationOp::Reorder(self.alpha).validate()?;
        AugmentationOp::Mask(self.gamma).validate()?;
        AugmentationOp::Crop(self.eta).validate()?;
        if self.kind.needs_mask_token() && self.mask_token.is_none() {
            return Err(Error::Config("mask augmentation needs a mask token".into()));
        }
        Ok(())
    }

    /// Two independently augmented views of `seq`.
    pub fn pair<R: Rng + ?Sized>(&self, seq: &[usize], rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let a = self.op(rng).apply(seq, self.mask_token, rng);
        let b = self.op(rng).apply(seq, self.mask_token, rng);
        (a, b)
    }
}
