use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::numerics::{Matrix, Real, Tape, Var};

/// Per-block tensors. Projection matrices are `d × d`; column block `h`
/// (width `d / heads`) is head `h`'s projection.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTensors<X> {
    pub w_query: X,
    pub w_key: X,
    pub w_value: X,
    pub w_pos_query: Option<X>,
    pub w_pos_key: Option<X>,
    pub w_pos_value: Option<X>,
    pub mlp_w1: X,
    pub mlp_b1: X,
    pub mlp_w2: X,
    pub mlp_b2: X,
    pub ln_gain: X,
    pub ln_bias: X,
}

/// Every learnable tensor of the encoder, generic over the slot type so the
/// same layout carries parameters, gradients, shapes and tape handles.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelTensors<X> {
    /// `(|V| + 1 [+ 1]) × d`; row 0 is padding.
    pub item_embeddings: X,
    /// `L × d`, row `t` is slot `t`.
    pub positional: Option<X>,
    pub blocks: Vec<BlockTensors<X>>,
}

pub type ModelParams<T> = ModelTensors<Matrix<T>>;

impl<X> BlockTensors<X> {
    fn push_entries<'a>(&'a self, n: usize, out: &mut Vec<(String, &'a X)>) {
        let name = |s: &str| format!("blocks.{n}.{s}");
        out.push((name("w_query"), &self.w_query));
        out.push((name("w_key"), &self.w_key));
        out.push((name("w_value"), &self.w_value));
        if let Some(x) = &self.w_pos_query {
            out.push((name("w_pos_query"), x));
        }
        if let Some(x) = &self.w_pos_key {
            out.push((name("w_pos_key"), x));
        }
        if let Some(x) = &self.w_pos_value {
            out.push((name("w_pos_value"), x));
        }
        out.push((name("mlp_w1"), &self.mlp_w1));
        out.push((name("mlp_b1"), &self.mlp_b1));
        out.push((name("mlp_w2"), &self.mlp_w2));
        out.push((name("mlp_b2"), &self.mlp_b2));
        out.push((name("ln_gain"), &self.ln_gain));
        out.push((name("ln_bias"), &self.ln_bias));
    }

    fn slots_mut(&mut self) -> Vec<&mut X> {
        let mut out = vec![&mut self.w_query, &mut self.w_key, &mut self.w_value];
        out.extend(self.w_pos_query.as_mut());
        out.extend(self.w_pos_key.as_mut());
        out.extend(self.w_pos_value.as_mut());
        out.extend([
            &mut self.mlp_w1,
            &mut self.mlp_b1,
            &mut self.mlp_w2,
            &mut self.mlp_b2,
            &mut self.ln_gain,
            &mut self.ln_bias,
        ]);
        out
    }

    fn map<'a, Y>(&'a self, n: usize, f: &mut impl FnMut(&str, &'a X) -> Y) -> BlockTensors<Y> {
        let mut g = |s: &str, x: &'a X| f(&format!("blocks.{n}.{s}"), x);
        BlockTensors {
            w_query: g("w_query", &self.w_query),
            w_key: g("w_key", &self.w_key),
            w_value: g("w_value", &self.w_value),
            w_pos_query: self.w_pos_query.as_ref().map(|x| g("w_pos_query", x)),
            w_pos_key: self.w_pos_key.as_ref().map(|x| g("w_pos_key", x)),
            w_pos_value: self.w_pos_value.as_ref().map(|x| g("w_pos_value", x)),
            mlp_w1: g("mlp_w1", &self.mlp_w1),
            mlp_b1: g("mlp_b1", &self.mlp_b1),
            mlp_w2: g("mlp_w2", &self.mlp_w2),
            mlp_b2: g("mlp_b2", &self.mlp_b2),
            ln_gain: g("ln_gain", &self.ln_gain),
            ln_bias: g("ln_bias", &self.ln_bias),
        }
    }
}

impl<X> ModelTensors<X> {
    /// Named tensors in canonical order.
    pub fn entries(&self) -> Vec<(String, &X)> {
        let mut out = vec![("item_embeddings".to_string(), &self.item_embeddings)];
        if let Some(p) = &self.positional {
            out.push(("positional_embeddings".to_string(), p));
        }
        for (n, b) in self.blocks.iter().enumerate() {
            b.push_entries(n, &mut out);
        }
        out
    }

    /// Mutable slots in the same order as [`Self::entries`].
    pub fn slots_mut(&mut self) -> Vec<&mut X> {
        let mut out = vec![&mut self.item_embeddings];
        out.extend(self.positional.as_mut());
        for b in &mut self.blocks {
            out.extend(b.slots_mut());
        }
        out
    }

    pub fn map<'a, Y>(&'a self, mut f: impl FnMut(&str, &'a X) -> Y) -> ModelTensors<Y> {
        ModelTensors {
            item_embeddings: f("item_embeddings", &self.item_embeddings),
            positional: self
                .positional
                .as_ref()
                .map(|p| f("positional_embeddings", p)),
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(n, b)| b.map(n, &mut f))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&X> {
        self.entries()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, x)| x)
    }

    /// Names of tensors that belong to the positional pathway (the table and
    /// the positional query/key/value projections).
    pub fn positional_names(&self) -> Vec<String> {
        self.entries()
            .into_iter()
            .map(|(n, _)| n)
            .filter(|n| n == "positional_embeddings" || n.contains(".w_pos_"))
            .collect()
    }
}

/// Tensor shapes implied by a configuration.
pub fn shapes(cfg: &ModelConfig) -> ModelTensors<(usize, usize)> {
    let d = cfg.dim;
    let block = || BlockTensors {
        w_query: (d, d),
        w_key: (d, d),
        w_value: (d, d),
        w_pos_query: cfg.has_positional_branch().then_some((d, d)),
        w_pos_key: cfg.has_positional_branch().then_some((d, d)),
        w_pos_value: (cfg.has_positional_branch() && cfg.separate_pos_value).then_some((d, d)),
        mlp_w1: (d, cfg.mlp_inner),
        mlp_b1: (1, cfg.mlp_inner),
        mlp_w2: (cfg.mlp_inner, d),
        mlp_b2: (1, d),
        ln_gain: (1, d),
        ln_bias: (1, d),
    };
    ModelTensors {
        item_embeddings: (cfg.item_rows(), d),
        positional: cfg.has_positional_table().then_some((cfg.max_len, d)),
        blocks: (0..cfg.blocks).map(|_| block()).collect(),
    }
}

impl<T: Real> ModelParams<T> {
    /// Weights and embeddings ~ N(0, init_std); biases zero; layer-norm gain one.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, cfg.init_std).expect("valid std");
        shapes(cfg).map(|name, &(r, c)| {
            if name.ends_with("ln_gain") {
                Matrix::filled(r, c, T::one())
            } else if name.ends_with("_b1") || name.ends_with("_b2") || name.ends_with("ln_bias") {
                Matrix::zeros(r, c)
            } else {
                Matrix::from_fn(r, c, |_, _| T::from_f64_lossy(normal.sample(rng)))
            }
        })
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_, m| Matrix::zeros(m.rows(), m.cols()))
    }

    /// Registers every tensor as a borrowed leaf on `tape`.
    pub fn bind<'p>(&'p self, tape: &mut Tape<'p, T>) -> ModelTensors<Var> {
        self.map(|_, m| tape.param(m))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        self.map(|_, m| m.cast())
    }
}
