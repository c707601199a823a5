use std::fmt;
use std::str::FromStr;

use crate::data::PadSide;
use crate::error::{Error, Result};
use crate::kv;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Relu,
    Gelu,
}

/// How slot positions reach the encoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PositionalMode {
    /// Separate positional attention branch whose queries and keys come only
    /// from the positional table.
    #[default]
    Decoupled,
    /// No positional branch; item embeddings plus positional embeddings feed
    /// the item branch.
    Additive,
    /// No positional information at all.
    Absent,
}

/// Operand of the skip connection inside each block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResidualSource {
    /// The block's own input (the embeddings for the first block).
    #[default]
    BlockInput,
    /// The embedding matrix at every depth.
    Embeddings,
}

macro_rules! text_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

text_enum!(Activation { Activation::Relu => "relu", Activation::Gelu => "gelu" });
text_enum!(PositionalMode {
    PositionalMode::Decoupled => "decoupled",
    PositionalMode::Additive => "additive",
    PositionalMode::Absent => "absent",
});
text_enum!(ResidualSource {
    ResidualSource::BlockInput => "block-input",
    ResidualSource::Embeddings => "embeddings",
});

/// Shape and wiring of the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// `|V|`; item indices run `1..=num_items`, 0 is padding.
    pub num_items: usize,
    /// Sequence length `L`.
    pub max_len: usize,
    pub dim: usize,
    pub heads: usize,
    pub blocks: usize,
    pub mlp_inner: usize,
    pub activation: Activation,
    pub dropout: f64,
    pub causal: bool,
    pub positional: PositionalMode,
    pub residual: ResidualSource,
    /// Give the positional branch its own value projection instead of reusing
    /// the item branch's.
    pub separate_pos_value: bool,
    /// Reserve row `num_items + 1` of the item table as a mask token.
    pub mask_token: bool,
    pub pad_side: PadSide,
    pub layer_norm_eps: f64,
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_items: 0,
            max_len: 100,
            dim: 64,
            heads: 2,
            blocks: 2,
            mlp_inner: 64,
            activation: Activation::Relu,
            dropout: 0.5,
            causal: true,
            positional: PositionalMode::Decoupled,
            residual: ResidualSource::BlockInput,
            separate_pos_value: false,
            mask_token: false,
            pad_side: PadSide::Left,
            layer_norm_eps: 1e-8,
            init_std: 0.02,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// Rows of the item table: padding, the catalog, and the optional mask token.
    pub fn item_rows(&self) -> usize {
        self.num_items + 1 + usize::from(self.mask_token)
    }

    pub fn mask_token_index(&self) -> Option<usize> {
        self.mask_token.then_some(self.num_items + 1)
    }

    pub fn has_positional_table(&self) -> bool {
        self.positional != PositionalMode::Absent
    }

    pub fn has_positional_branch(&self) -> bool {
        self.positional == PositionalMode::Decoupled
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_items == 0 {
            return Err(Error::Config("num_items must be positive".into()));
        }
        if self.max_len == 0 || self.dim == 0 || self.heads == 0 || self.mlp_inner == 0 {
            return Err(Error::Config("max_len, dim, heads and mlp_inner must be positive".into()));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "dim {} is not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if self.blocks == 0 {
            return Err(Error::Config("at least one block is required".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        kv::line(&mut s, "num_items", self.num_items);
        kv::line(&mut s, "max_len", self.max_len);
        kv::line(&mut s, "dim", self.dim);
        kv::line(&mut s, "heads", self.heads);
        kv::line(&mut s, "blocks", self.blocks);
        kv::line(&mut s, "mlp_inner", self.mlp_inner);
        kv::line(&mut s, "activation", self.activation);
        kv::line(&mut s, "dropout", self.dropout);
        kv::line(&mut s, "causal", self.causal);
        kv::line(&mut s, "positional", self.positional);
        kv::line(&mut s, "residual", self.residual);
        kv::line(&mut s, "separate_pos_value", self.separate_pos_value);
        kv::line(&mut s, "mask_token", self.mask_token);
        kv::line(&mut s, "pad_side", self.pad_side);
        kv::line(&mut s, "layer_norm_eps", self.layer_norm_eps);
        kv::line(&mut s, "init_std", self.init_std);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in kv::parse_lines(text)? {
            let v = v.as_str();
            match k.as_str() {
                "num_items" => cfg.num_items = kv::parse_value(&k, v)?,
                "max_len" => cfg.max_len = kv::parse_value(&k, v)?,
                "dim" => cfg.dim = kv::parse_value(&k, v)?,
                "heads" => cfg.heads = kv::parse_value(&k, v)?,
                "blocks" => cfg.blocks = kv::parse_value(&k, v)?,
                "mlp_inner" => cfg.mlp_inner = kv::parse_value(&k, v)?,
                "activation" => cfg.activation = v.parse()?,
                "dropout" => cfg.dropout = kv::parse_value(&k, v)?,
                "causal" => cfg.causal = kv::parse_value(&k, v)?,
                "positional" => cfg.positional = v.parse()?,
                "residual" => cfg.residual = v.parse()?,
                "separate_pos_value" => cfg.separate_pos_value = kv::parse_value(&k, v)?,
                "mask_token" => cfg.mask_token = kv::parse_value(&k, v)?,
                "pad_side" => cfg.pad_side = v.parse()?,
                "layer_norm_eps" => cfg.layer_norm_eps = kv::parse_value(&k, v)?,
                "init_std" => cfg.init_std = kv::parse_value(&k, v)?,
                other => return Err(Error::Format(format!("unknown model key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = ModelConfig {
            num_items: 17,
            activation: Activation::Gelu,
            positional: PositionalMode::Additive,
            residual: ResidualSource::Embeddings,
            pad_side: PadSide::Right,
            ..Default::default()
        };
        assert_eq!(ModelConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn validation() {
        let ok = ModelConfig {
            num_items: 5,
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        assert_eq!(ok.head_dim(), 32);
        for bad in [
            ModelConfig { heads: 3, ..ok.clone() },
            ModelConfig { blocks: 0, ..ok.clone() },
            ModelConfig { dropout: 1.0, ..ok.clone() },
            ModelConfig { num_items: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn table_rows() {
        let cfg = ModelConfig {
            num_items: 10,
            ..Default::default()
        };
        assert_eq!(cfg.item_rows(), 11);
        assert_eq!(cfg.mask_token_index(), None);
        let masked = ModelConfig { mask_token: true, ..cfg };
        assert_eq!(masked.item_rows(), 12);
        assert_eq!(masked.mask_token_index(), Some(11));
    }
}
