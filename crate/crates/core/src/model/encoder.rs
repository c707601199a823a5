//! The context-aware block stack.
//!
//! Each block runs two attention branches over the same value projection:
//! the item branch takes queries and keys from the block input, the
//! positional branch takes them from the positional table alone. The
//! concatenated head outputs of both branches are summed and passed through
//! `LayerNorm(dropout(MLP(Sv + Sp)) + residual)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, ModelConfig, PositionalMode, ResidualSource};
use super::params::{BlockTensors, ModelParams, ModelTensors};
use crate::data::{to_fixed_length, PAD};
use crate::error::{Error, Result};
use crate::numerics::{ops, Matrix, Real, Tape, Var};

/// Which `(query, key)` slot pairs may interact. Keys holding padding are
/// never attended to; with `causal`, query `t` only sees keys `≤ t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMask {
    len: usize,
    allowed: Arc<[bool]>,
}

impl AttentionMask {
    pub fn new(slots: &[usize], causal: bool) -> Self {
        let len = slots.len();
        let allowed = (0..len * len)
            .map(|k| {
                let (q, key) = (k / len, k % len);
                slots[key] != PAD && (!causal || key <= q)
            })
            .collect();
        Self { len, allowed }
    }

    /// Every pair allowed.
    pub fn full(len: usize) -> Self {
        Self {
            len,
            allowed: vec![true; len * len].into(),
        }
    }

    pub fn allows(&self, query: usize, key: usize) -> bool {
        self.allowed[query * self.len + key]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.allowed
    }
}

/// Tape handles for one attention branch of one block.
#[derive(Clone, Debug)]
pub struct BranchTrace {
    /// Pre-softmax scaled logits per head.
    pub logits: Vec<Var>,
    /// Attention weights per head.
    pub weights: Vec<Var>,
    /// Head outputs (`L × dh`).
    pub heads: Vec<Var>,
    /// Concatenated head outputs (`L × d`).
    pub concat: Var,
}

#[derive(Clone, Debug)]
pub struct BlockTrace {
    pub item: BranchTrace,
    pub positional: Option<BranchTrace>,
    /// `Sv + Sp` (or `Sv` alone without a positional branch).
    pub aggregate_input: Var,
    pub output: Var,
}

#[derive(Clone, Debug)]
pub struct EncoderTrace {
    /// Encoder input: item embeddings, plus positions in additive mode.
    pub input: Var,
    pub blocks: Vec<BlockTrace>,
    /// Final hidden rows `L × d`.
    pub hidden: Var,
}

/// Options for one pass through the stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PassOptions {
    /// Use the configured positional pathway. When false the stack sees item
    /// content only: no positional branch and no added positions.
    pub positions: bool,
    pub training: bool,
}

impl PassOptions {
    pub const EVAL: Self = Self {
        positions: true,
        training: false,
    };
    pub const TRAIN: Self = Self {
        positions: true,
        training: true,
    };
}

fn attention_branch<T: Real>(
    tape: &mut Tape<'_, T>,
    cfg: &ModelConfig,
    source: Var,
    w_query: Var,
    w_key: Var,
    values: Var,
    mask: &AttentionMask,
) -> BranchTrace {
    let dh = cfg.head_dim();
    let inv_sqrt = T::one() / T::from_usize(dh).unwrap().sqrt();
    let q = tape.matmul(source, w_query);
    let k = tape.matmul(source, w_key);
    let mut trace = BranchTrace {
        logits: Vec::with_capacity(cfg.heads),
        weights: Vec::with_capacity(cfg.heads),
        heads: Vec::with_capacity(cfg.heads),
        concat: source,
    };
    for h in 0..cfg.heads {
        let qh = tape.slice_cols(q, h * dh, dh);
        let kh = tape.slice_cols(k, h * dh, dh);
        let raw = tape.matmul_nt(qh, kh);
        let logits = tape.scale(raw, inv_sqrt);
        let weights = tape.masked_softmax(logits, &mask.allowed);
        let vh = tape.slice_cols(values, h * dh, dh);
        let out = tape.matmul(weights, vh);
        trace.logits.push(logits);
        trace.weights.push(weights);
        trace.heads.push(out);
    }
    trace.concat = tape.concat_cols(&trace.heads);
    trace
}

/// One context-aware block on the tape.
#[allow(clippy::too_many_arguments)]
pub fn block_on_tape<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<'_, T>,
    cfg: &ModelConfig,
    block: &BlockTensors<Var>,
    input: Var,
    residual: Var,
    positions: Option<Var>,
    mask: &AttentionMask,
    training: bool,
    rng: &mut R,
) -> BlockTrace {
    let values = tape.matmul(input, block.w_value);
    let item = attention_branch(tape, cfg, input, block.w_query, block.w_key, values, mask);
    let positional = match (positions, block.w_pos_query, block.w_pos_key) {
        (Some(p), Some(wq), Some(wk)) => {
            let pos_values = match block.w_pos_value {
                Some(wv) => tape.matmul(input, wv),
                None => values,
            };
            Some(attention_branch(tape, cfg, p, wq, wk, pos_values, mask))
        }
        _ => None,
    };
    let aggregate_input = match &positional {
        Some(p) => tape.add(item.concat, p.concat),
        None => item.concat,
    };
    let pre = tape.matmul(aggregate_input, block.mlp_w1);
    let pre = tape.add_row(pre, block.mlp_b1);
    let act = match cfg.activation {
        Activation::Relu => tape.relu(pre),
        Activation::Gelu => tape.gelu(pre),
    };
    let mlp = tape.matmul(act, block.mlp_w2);
    let mlp = tape.add_row(mlp, block.mlp_b2);
    let dropped = tape.dropout(mlp, cfg.dropout, training, rng);
    let skip = tape.add(dropped, residual);
    let eps = T::from_f64_lossy(cfg.layer_norm_eps);
    let output = tape.layer_norm(skip, block.ln_gain, block.ln_bias, eps);
    BlockTrace {
        item,
        positional,
        aggregate_input,
        output,
    }
}

/// Index of the most recent item in a fixed-length sequence (the final slot
/// under left padding).
pub fn last_real_slot(slots: &[usize]) -> usize {
    slots.iter().rposition(|&s| s != PAD).unwrap_or(slots.len().saturating_sub(1))
}

/// Embeds `slots` and runs every block.
pub fn encode_on_tape<T: Real, R: Rng + ?Sized>(
    tape: &mut Tape<'_, T>,
    cfg: &ModelConfig,
    vars: &ModelTensors<Var>,
    slots: &[usize],
    opts: PassOptions,
    rng: &mut R,
) -> EncoderTrace {
    assert_eq!(slots.len(), cfg.max_len, "sequence must be fixed length");
    let embedded = tape.gather(vars.item_embeddings, slots);
    let positions = if opts.positions { vars.positional } else { None };
    let input = match (cfg.positional, positions) {
        (PositionalMode::Additive, Some(p)) => tape.add(embedded, p),
        _ => embedded,
    };
    let branch_positions = match cfg.positional {
        PositionalMode::Decoupled => positions,
        _ => None,
    };
    let mask = AttentionMask::new(slots, cfg.causal);
    let mut blocks = Vec::with_capacity(cfg.blocks);
    let mut x = input;
    for block in &vars.blocks {
        let residual = match cfg.residual {
            ResidualSource::BlockInput => x,
            ResidualSource::Embeddings => input,
        };
        let trace = block_on_tape(
            tape,
            cfg,
            block,
            x,
            residual,
            branch_positions,
            &mask,
            opts.training,
            rng,
        );
        x = trace.output;
        blocks.push(trace);
    }
    EncoderTrace {
        input,
        blocks,
        hidden: x,
    }
}

/// Encoder output for one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRepresentation<T> {
    /// `L × d` final hidden rows.
    pub hidden: Matrix<T>,
    /// Hidden row of the last real slot, used as the user representation.
    pub user_vector: Vec<T>,
}

/// Result of running a single attention head in isolation.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutput<T> {
    pub logits: Matrix<T>,
    pub weights: Matrix<T>,
    pub output: Matrix<T>,
}

/// Per-block, per-head attention weights of one eval-mode pass.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMaps<T> {
    pub item: Vec<Vec<Matrix<T>>>,
    pub positional: Vec<Vec<Matrix<T>>>,
}

/// Configuration plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
}

fn eval_rng() -> ChaCha8Rng {
    // Never drawn from in eval mode.
    ChaCha8Rng::seed_from_u64(0)
}

impl<T: Real> Model<T> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config, rng);
        Ok(Self { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: ModelParams<T>) -> Result<Self> {
        config.validate()?;
        let want = super::params::shapes(&config);
        let have = params.map(|_, m| m.shape());
        if want != have {
            return Err(Error::Config("parameter shapes do not match config".into()));
        }
        Ok(Self { config, params })
    }

    /// Latest `L` items in the configured padding layout.
    pub fn fixed_length(&self, items: &[usize]) -> Vec<usize> {
        to_fixed_length(items, self.config.max_len, self.config.pad_side)
    }

    fn check_slots(&self, slots: &[usize]) -> Result<()> {
        if slots.len() != self.config.max_len {
            return Err(Error::Data(format!(
                "sequence has {} slots, model expects {}",
                slots.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = slots.iter().find(|&&i| i >= self.config.item_rows()) {
            return Err(Error::Data(format!(
                "item index {bad} outside 0..{}",
                self.config.item_rows()
            )));
        }
        Ok(())
    }

    /// Row `t` is the embedding of the item in slot `t`.
    pub fn embed_sequence(&self, slots: &[usize]) -> Result<Matrix<T>> {
        self.check_slots(slots)?;
        let mut tape = Tape::new();
        let table = tape.param(&self.params.item_embeddings);
        let e = tape.gather(table, slots);
        Ok(tape.value(e).clone())
    }

    pub fn encode<R: Rng + ?Sized>(
        &self,
        slots: &[usize],
        training: bool,
        rng: &mut R,
    ) -> Result<SequenceRepresentation<T>> {
        self.encode_with(slots, PassOptions { positions: true, training }, rng)
    }

    pub fn encode_with<R: Rng + ?Sized>(
        &self,
        slots: &[usize],
        opts: PassOptions,
        rng: &mut R,
    ) -> Result<SequenceRepresentation<T>> {
        self.check_slots(slots)?;
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let trace = encode_on_tape(&mut tape, &self.config, &vars, slots, opts, rng);
        let hidden = tape.value(trace.hidden).clone();
        let user_vector = hidden.row(last_real_slot(slots)).to_vec();
        Ok(SequenceRepresentation {
            hidden,
            user_vector,
        })
    }

    /// Eval-mode user representation for a raw (unpadded) history.
    pub fn user_vector(&self, history: &[usize]) -> Result<Vec<T>> {
        let slots = self.fixed_length(history);
        Ok(self.encode(&slots, false, &mut eval_rng())?.user_vector)
    }

    /// Attention weights of every head in an eval-mode pass.
    pub fn attention_maps(&self, slots: &[usize]) -> Result<AttentionMaps<T>> {
        self.check_slots(slots)?;
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let trace = encode_on_tape(
            &mut tape,
            &self.config,
            &vars,
            slots,
            PassOptions::EVAL,
            &mut eval_rng(),
        );
        let collect = |ws: &[Var]| ws.iter().map(|&w| tape.value(w).clone()).collect::<Vec<_>>();
        Ok(AttentionMaps {
            item: trace.blocks.iter().map(|b| collect(&b.item.weights)).collect(),
            positional: trace
                .blocks
                .iter()
                .filter_map(|b| b.positional.as_ref())
                .map(|p| collect(&p.weights))
                .collect(),
        })
    }

    fn block_vars<'p>(&'p self, tape: &mut Tape<'p, T>, block: usize) -> (ModelTensors<Var>, usize) {
        assert!(block < self.config.blocks, "block {block} out of range");
        (self.params.bind(tape), block)
    }

    /// Item-branch head `head` of block `block` applied to `input` (`L × d`).
    pub fn item_attention_head(
        &self,
        block: usize,
        input: &Matrix<T>,
        mask: &AttentionMask,
        head: usize,
    ) -> HeadOutput<T> {
        let mut tape = Tape::new();
        let (vars, b) = self.block_vars(&mut tape, block);
        let bv = &vars.blocks[b];
        let x = tape.constant(input.clone());
        let values = tape.matmul(x, bv.w_value);
        let tr = attention_branch(&mut tape, &self.config, x, bv.w_query, bv.w_key, values, mask);
        HeadOutput {
            logits: tape.value(tr.logits[head]).clone(),
            weights: tape.value(tr.weights[head]).clone(),
            output: tape.value(tr.heads[head]).clone(),
        }
    }

    /// Positional-branch head: queries and keys from the positional table,
    /// values from `input`. Panics when the model has no positional branch.
    pub fn positional_attention_head(
        &self,
        block: usize,
        input: &Matrix<T>,
        mask: &AttentionMask,
        head: usize,
    ) -> HeadOutput<T> {
        let mut tape = Tape::new();
        let (vars, b) = self.block_vars(&mut tape, block);
        let bv = &vars.blocks[b];
        let (p, wq, wk) = match (vars.positional, bv.w_pos_query, bv.w_pos_key) {
            (Some(p), Some(wq), Some(wk)) => (p, wq, wk),
            _ => panic!("model has no positional branch"),
        };
        let x = tape.constant(input.clone());
        let values = match bv.w_pos_value {
            Some(wv) => tape.matmul(x, wv),
            None => tape.matmul(x, bv.w_value),
        };
        let tr = attention_branch(&mut tape, &self.config, p, wq, wk, values, mask);
        HeadOutput {
            logits: tape.value(tr.logits[head]).clone(),
            weights: tape.value(tr.weights[head]).clone(),
            output: tape.value(tr.heads[head]).clone(),
        }
    }

    /// One block on explicit inputs. `embeddings` is the skip operand when
    /// the residual source is [`ResidualSource::Embeddings`].
    pub fn cab_forward<R: Rng + ?Sized>(
        &self,
        block: usize,
        previous: &Matrix<T>,
        embeddings: &Matrix<T>,
        mask: &AttentionMask,
        training: bool,
        rng: &mut R,
    ) -> Matrix<T> {
        let mut tape = Tape::new();
        let (vars, b) = self.block_vars(&mut tape, block);
        let x = tape.constant(previous.clone());
        let residual = match self.config.residual {
            ResidualSource::BlockInput => x,
            ResidualSource::Embeddings => tape.constant(embeddings.clone()),
        };
        let positions = if self.config.has_positional_branch() {
            vars.positional
        } else {
            None
        };
        let tr = block_on_tape(
            &mut tape,
            &self.config,
            &vars.blocks[b],
            x,
            residual,
            positions,
            mask,
            training,
            rng,
        );
        tape.value(tr.output).clone()
    }

    /// Dot product of `user_vector` with every catalog item (`1..=|V|`);
    /// entry `i - 1` scores item `i`.
    pub fn score_all(&self, user_vector: &[T]) -> Vec<T> {
        let table = &self.params.item_embeddings;
        (1..=self.config.num_items)
            .map(|i| ops::dot(user_vector, table.row(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(causal: bool) -> Model<f64> {
        let cfg = ModelConfig {
            num_items: 7,
            max_len: 4,
            dim: 4,
            heads: 2,
            blocks: 2,
            mlp_inner: 6,
            causal,
            dropout: 0.5,
            init_std: 0.5,
            ..Default::default()
        };
        Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn mask_layout() {
        let m = AttentionMask::new(&[0, 3, 4], true);
        assert!(!m.allows(2, 0));
        assert!(m.allows(2, 1) && m.allows(2, 2) && !m.allows(1, 2));
        let m = AttentionMask::new(&[0, 3, 4], false);
        assert!(m.allows(1, 2) && !m.allows(1, 0));
    }

    #[test]
    fn embedding_lookup() {
        let m = toy(true);
        let e = m.embed_sequence(&[0, 0, 0, 0]).unwrap();
        for r in 0..4 {
            assert_eq!(e.row(r), m.params.item_embeddings.row(0));
        }
        let e = m.embed_sequence(&[0, 5, 2, 7]).unwrap();
        assert_eq!(e.row(1), m.params.item_embeddings.row(5));
        assert_eq!(e.row(3), m.params.item_embeddings.row(7));
        let swapped = m.embed_sequence(&[0, 2, 5, 7]).unwrap();
        assert_eq!(swapped.row(1), e.row(2));
        assert_eq!(swapped.row(2), e.row(1));
        assert!(matches!(m.embed_sequence(&[0, 0, 0, 8]), Err(Error::Data(_))));
        assert!(m.embed_sequence(&[1, 2]).is_err());
    }

    #[test]
    fn eval_encode_deterministic_and_user_vector_is_last_row() {
        let m = toy(true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = m.encode(&[0, 1, 2, 3], false, &mut rng).unwrap();
        let b = m.encode(&[0, 1, 2, 3], false, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.user_vector, a.hidden.row(3));
        assert!(a.hidden.is_finite());
    }

    #[test]
    fn one_block_matches_manual_cab() {
        let mut m = toy(true);
        m.config.blocks = 1;
        m.params.blocks.truncate(1);
        let slots = [0, 4, 1, 6];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = m.encode(&slots, false, &mut rng).unwrap();
        let e = m.embed_sequence(&slots).unwrap();
        let mask = AttentionMask::new(&slots, true);
        let manual = m.cab_forward(0, &e, &e, &mask, false, &mut rng);
        assert_eq!(rep.hidden, manual);
    }

    #[test]
    fn zero_mlp_reduces_to_layer_norm_of_input() {
        let mut m = toy(false);
        for b in &mut m.params.blocks {
            b.mlp_w2 = Matrix::zeros(6, 4);
        }
        let e = m.embed_sequence(&[1, 2, 3, 4]).unwrap();
        let mask = AttentionMask::new(&[1, 2, 3, 4], false);
        let out = m.cab_forward(0, &e, &e, &mask, false, &mut ChaCha8Rng::seed_from_u64(0));
        let b = &m.params.blocks[0];
        let ln = ops::layer_norm(&e, &b.ln_gain, &b.ln_bias, 1e-8).unwrap();
        assert_eq!(out, ln);
    }

    #[test]
    fn single_real_item_attends_to_itself() {
        let m = toy(true);
        let slots = [0, 0, 0, 3];
        let e = m.embed_sequence(&slots).unwrap();
        let mask = AttentionMask::new(&slots, true);
        let dh = m.config.head_dim();
        for h in 0..2 {
            let out = m.item_attention_head(0, &e, &mask, h);
            assert_eq!(out.weights.row(3), &[0.0, 0.0, 0.0, 1.0]);
            let v = ops::matmul(&e, &m.params.blocks[0].w_value).unwrap().slice_cols(h * dh, dh);
            assert_eq!(out.output.row(3), v.row(3));
        }
    }

    #[test]
    fn zero_query_gives_uniform_attention() {
        let mut m = toy(false);
        m.params.blocks[0].w_query = Matrix::zeros(4, 4);
        m.params.positional = Some(Matrix::zeros(4, 4));
        let slots = [0, 2, 3, 4];
        let e = m.embed_sequence(&slots).unwrap();
        let mask = AttentionMask::new(&slots, false);
        for out in [
            m.item_attention_head(0, &e, &mask, 1),
            m.positional_attention_head(0, &e, &mask, 0),
        ] {
            for r in 0..4 {
                assert_eq!(out.weights.row(r)[0], 0.0);
                for c in 1..4 {
                    assert!((out.weights.get(r, c) - 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
    }

    /// Scalar-loop attention: softmax over allowed keys of (xWq)(xWk)ᵀ/√dh,
    /// applied to xWv, written without any matrix helpers.
    #[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
    fn scalar_attention(
        q_src: &Matrix<f64>,
        k_src: &Matrix<f64>,
        x: &Matrix<f64>,
        wq: &Matrix<f64>,
        wk: &Matrix<f64>,
        wv: &Matrix<f64>,
        col0: usize,
        dh: usize,
        mask: &AttentionMask,
    ) -> Matrix<f64> {
        let l = x.rows();
        let d = x.cols();
        let proj = |src: &Matrix<f64>, w: &Matrix<f64>, t: usize, c: usize| {
            let mut s = 0.0;
            for k in 0..d {
                s += src.get(t, k) * w.get(k, col0 + c);
            }
            s
        };
        let mut out = Matrix::zeros(l, dh);
        for i in 0..l {
            let mut w = vec![0.0; l];
            let mut max = f64::NEG_INFINITY;
            for j in 0..l {
                if mask.allows(i, j) {
                    let mut s = 0.0;
                    for c in 0..dh {
                        s += proj(q_src, wq, i, c) * proj(k_src, wk, j, c);
                    }
                    w[j] = s / (dh as f64).sqrt();
                    max = max.max(w[j]);
                }
            }
            let mut z = 0.0;
            for j in 0..l {
                w[j] = if mask.allows(i, j) { (w[j] - max).exp() } else { 0.0 };
                z += w[j];
            }
            for c in 0..dh {
                let mut s = 0.0;
                for j in 0..l {
                    if z > 0.0 {
                        s += w[j] / z * proj(x, wv, j, c);
                    }
                }
                out.set(i, c, s);
            }
        }
        out
    }

    #[test]
    fn heads_match_scalar_loop() {
        let cfg = ModelConfig {
            num_items: 5,
            max_len: 3,
            dim: 4,
            heads: 1,
            blocks: 1,
            mlp_inner: 4,
            init_std: 0.7,
            ..Default::default()
        };
        let m: Model<f64> = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let slots = [2, 5, 1];
        let e = m.embed_sequence(&slots).unwrap();
        let mask = AttentionMask::new(&slots, true);
        let b = &m.params.blocks[0];
        let item = m.item_attention_head(0, &e, &mask, 0);
        let want = scalar_attention(&e, &e, &e, &b.w_query, &b.w_key, &b.w_value, 0, 4, &mask);
        assert!(item.output.max_abs_diff(&want) < 1e-6);
        let p = m.params.positional.as_ref().unwrap();
        let pos = m.positional_attention_head(0, &e, &mask, 0);
        let want = scalar_attention(
            p,
            p,
            &e,
            b.w_pos_query.as_ref().unwrap(),
            b.w_pos_key.as_ref().unwrap(),
            &b.w_value,
            0,
            4,
            &mask,
        );
        assert!(pos.output.max_abs_diff(&want) < 1e-6);
    }

    #[test]
    fn positional_logits_ignore_content() {
        let m = toy(true);
        let mask = AttentionMask::full(4);
        let a = m.embed_sequence(&[1, 2, 3, 4]).unwrap();
        let b = m.embed_sequence(&[7, 6, 5, 1]).unwrap();
        let pa = m.positional_attention_head(1, &a, &mask, 1);
        let pb = m.positional_attention_head(1, &b, &mask, 1);
        assert_eq!(pa.logits, pb.logits);
        assert_eq!(pa.weights, pb.weights);
        assert_ne!(pa.output, pb.output);
    }

    #[test]
    fn causal_rows_before_change_are_identical() {
        let m = toy(true);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = m.encode(&[0, 1, 2, 3], false, &mut rng).unwrap();
        let b = m.encode(&[0, 1, 2, 5], false, &mut rng).unwrap();
        for r in 0..3 {
            assert_eq!(a.hidden.row(r), b.hidden.row(r));
        }
        assert_ne!(a.hidden.row(3), b.hidden.row(3));
    }

    #[test]
    fn scores_are_dot_products() {
        let m = toy(true);
        let u = vec![0.3, -1.0, 0.25, 2.0];
        let s = m.score_all(&u);
        assert_eq!(s.len(), 7);
        for i in 1..=7 {
            let row = m.params.item_embeddings.row(i);
            let want: f64 = (0..4).map(|k| u[k] * row[k]).sum();
            assert!((s[i - 1] - want).abs() < 1e-12);
        }
        assert!(m.score_all(&[0.0; 4]).iter().all(|&v| v == 0.0));
    }
}
