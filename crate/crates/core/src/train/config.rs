use std::fmt;
use std::str::FromStr;

use crate::contrastive::{AugmentationKind, Augmenter, Direction, Representation};
use crate::data::PadSide;
use crate::error::{Error, Result};
use crate::kv;
use crate::model::{Activation, ModelConfig, PositionalMode, ResidualSource};
use crate::numerics::AdamConfig;

/// Named ablations. Each one overrides part of a [`TrainConfig`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Variant {
    #[default]
    Full,
    /// No contrastive objective.
    NoContrastive,
    /// No positional information anywhere.
    NoPositional,
    /// Positions added to item embeddings instead of a separate branch.
    AdditivePositions,
    /// Contrastive views made by masking.
    MaskViews,
    /// Contrastive views made by cropping.
    CropViews,
    /// Contrastive views made by a random choice of reorder, mask or crop.
    MixedViews,
    /// Contrastive representation is the last hidden vector only.
    LastVector,
    /// Contrastive representation comes from the stack with positions.
    PostAggregation,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Full,
        Variant::NoContrastive,
        Variant::NoPositional,
        Variant::AdditivePositions,
        Variant::MaskViews,
        Variant::CropViews,
        Variant::MixedViews,
        Variant::LastVector,
        Variant::PostAggregation,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoContrastive => "PDMRec1",
            Variant::NoPositional => "PDMRec2",
            Variant::AdditivePositions => "PDMRec3",
            Variant::MaskViews => "PDMRec4",
            Variant::CropViews => "PDMRec5",
            Variant::MixedViews => "PDMRec6",
            Variant::LastVector => "PDMRec7",
            Variant::PostAggregation => "PDMRec8",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Everything a training run needs. Text form is flat `key = value`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub mlp_inner: usize,
    pub activation: Activation,
    pub dropout: f64,
    pub max_len: usize,
    pub causal: bool,
    pub pad_side: PadSide,
    pub positional: PositionalMode,
    pub residual: ResidualSource,
    pub separate_pos_value: bool,
    pub layer_norm_eps: f64,
    pub init_std: f64,

    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub augmentation: AugmentationKind,
    pub representation: Representation,
    pub direction: Direction,

    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Cutoff of the validation recall used for early stopping.
    pub valid_k: usize,
    pub eval_ks: Vec<usize>,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            heads: 2,
            blocks: 2,
            mlp_inner: 64,
            activation: Activation::Relu,
            dropout: 0.5,
            max_len: 100,
            causal: true,
            pad_side: PadSide::Left,
            positional: PositionalMode::Decoupled,
            residual: ResidualSource::BlockInput,
            separate_pos_value: false,
            layer_norm_eps: 1e-8,
            init_std: 0.02,
            lambda: 0.1,
            alpha: 0.2,
            gamma: 0.5,
            eta: 0.5,
            augmentation: AugmentationKind::Reorder,
            representation: Representation::Concat,
            direction: Direction::Symmetric,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 512,
            max_epochs: 200,
            patience: 15,
            valid_k: 50,
            eval_ks: vec![20, 50, 100],
            seed: 0,
            variant: Variant::Full,
        }
    }
}

macro_rules! fields {
    ($mac:ident) => {
        $mac!(
            dim, heads, blocks, mlp_inner, activation, dropout, max_len, causal, pad_side,
            positional, residual, separate_pos_value, layer_norm_eps, init_std, lambda, alpha,
            gamma, eta, augmentation, representation, direction, lr, beta1, beta2, adam_eps,
            batch_size, max_epochs, patience, valid_k, seed, variant
        )
    };
}

impl TrainConfig {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        macro_rules! assign {
            ($($f:ident),*) => {
                match key {
                    $(stringify!($f) => {
                        self.$f = value.parse().map_err(|_| {
                            Error::Config(format!("bad value `{value}` for `{key}`"))
                        })?;
                    })*
                    "eval_ks" => self.eval_ks = parse_ks(value)?,
                    other => return Err(Error::Config(format!("unknown config key `{other}`"))),
                }
            };
        }
        fields!(assign);
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in kv::parse_lines(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        macro_rules! emit {
            ($($f:ident),*) => {
                $(kv::line(&mut s, stringify!($f), &self.$f);)*
            };
        }
        fields!(emit);
        let ks: Vec<String> = self.eval_ks.iter().map(usize::to_string).collect();
        kv::line(&mut s, "eval_ks", ks.join(","));
        s
    }

    /// The configuration with the variant's overrides applied.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        match self.variant {
            Variant::Full => {}
            Variant::NoContrastive => c.lambda = 0.0,
            Variant::NoPositional => c.positional = PositionalMode::Absent,
            Variant::AdditivePositions => c.positional = PositionalMode::Additive,
            Variant::MaskViews => c.augmentation = AugmentationKind::Mask,
            Variant::CropViews => c.augmentation = AugmentationKind::Crop,
            Variant::MixedViews => c.augmentation = AugmentationKind::Mixed,
            Variant::LastVector => c.representation = Representation::Last,
            Variant::PostAggregation => c.representation = Representation::PostAggregation,
        }
        c
    }

    pub fn uses_contrastive(&self) -> bool {
        self.lambda != 0.0
    }

    /// Encoder wiring for a catalog of `num_items` items, after variant overrides.
    pub fn model_config(&self, num_items: usize) -> ModelConfig {
        let e = self.effective();
        ModelConfig {
            num_items,
            max_len: e.max_len,
            dim: e.dim,
            heads: e.heads,
            blocks: e.blocks,
            mlp_inner: e.mlp_inner,
            activation: e.activation,
            dropout: e.dropout,
            causal: e.causal,
            positional: e.positional,
            residual: e.residual,
            separate_pos_value: e.separate_pos_value,
            mask_token: e.uses_contrastive() && e.augmentation.needs_mask_token(),
            pad_side: e.pad_side,
            layer_norm_eps: e.layer_norm_eps,
            init_std: e.init_std,
        }
    }

    pub fn augmenter(&self, model: &ModelConfig) -> Augmenter {
        let e = self.effective();
        Augmenter {
            kind: e.augmentation,
            alpha: e.alpha,
            gamma: e.gamma,
            eta: e.eta,
            mask_token: model.mask_token_index(),
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.effective();
        if e.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if e.lambda < 0.0 || !e.lambda.is_finite() {
            return Err(Error::Config(format!("lambda {} must be finite and non-negative", e.lambda)));
        }
        if e.lr <= 0.0 {
            return Err(Error::Config("lr must be positive".into()));
        }
        if e.valid_k == 0 || e.eval_ks.is_empty() || e.eval_ks.contains(&0) {
            return Err(Error::Config("metric cutoffs must be positive".into()));
        }
        if e.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        let model = self.model_config(1);
        model.validate()?;
        if e.uses_contrastive() {
            self.augmenter(&model).validate()?;
        }
        Ok(())
    }
}

fn parse_ks(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|k| {
            k.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad cutoff `{k}`")))
        })
        .collect()
}
