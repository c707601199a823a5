//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records each primitive as it is evaluated. Parameters enter as
//! borrowed leaves so binding a large embedding table costs nothing.
//! [`Tape::backward`] walks the record in reverse and returns a
//! [`Gradients`] table indexed by [`Var`].

use std::sync::Arc;

use rand::Rng;

use super::matrix::{Matrix, Real};
use super::ops;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value<'p, T> {
    Borrowed(&'p Matrix<T>),
    Owned(Matrix<T>),
}

impl<T> Value<'_, T> {
    fn get(&self) -> &Matrix<T> {
        match self {
            Value::Borrowed(m) => m,
            Value::Owned(m) => m,
        }
    }
}

/// One row of a cross-entropy objective: `row` of the logits, the target
/// column, and an optional column removed from the normaliser.
#[derive(Clone, Copy, Debug)]
pub struct CeTerm {
    pub row: usize,
    pub target: usize,
    pub excluded: Option<usize>,
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Gelu(Var),
    MaskedSoftmax(Var),
    LayerNorm {
        input: Var,
        gain: Var,
        bias: Var,
        normalized: Matrix<T>,
        inv_std: Vec<T>,
    },
    Dropout {
        input: Var,
        mask: Matrix<T>,
    },
    Gather {
        table: Var,
        indices: Vec<usize>,
    },
    ConcatCols(Vec<Var>),
    SliceCols {
        input: Var,
        start: usize,
    },
    ConcatRows(Vec<Var>),
    SliceRows {
        input: Var,
        start: usize,
    },
    Flatten(Var),
    MaskRows {
        input: Var,
        keep: Vec<bool>,
    },
    Sum(Var),
    CrossEntropy {
        logits: Var,
        terms: Vec<CeTerm>,
        probs: Matrix<T>,
    },
}

struct Node<'p, T> {
    value: Value<'p, T>,
    op: Op<T>,
}

/// Records primitive applications for one forward pass.
pub struct Tape<'p, T> {
    nodes: Vec<Node<'p, T>>,
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Value<'p, T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn owned(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.push(Value::Owned(value), op)
    }

    /// Differentiable leaf borrowing an external tensor.
    pub fn param(&mut self, m: &'p Matrix<T>) -> Var {
        self.push(Value::Borrowed(m), Op::Leaf)
    }

    /// Leaf holding an owned value (inputs, constants).
    pub fn constant(&mut self, m: Matrix<T>) -> Var {
        self.owned(m, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        self.nodes[v.0].value.get()
    }

    pub fn scalar(&self, v: Var) -> T {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "scalar node");
        m.get(0, 0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = ops::matmul(self.value(a), self.value(b)).expect("tape matmul");
        self.owned(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let out = ops::matmul_nt(self.value(a), self.value(b)).expect("tape matmul_nt");
        self.owned(out, Op::MatMulNT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).add(self.value(b)).expect("tape add");
        self.owned(out, Op::Add(a, b))
    }

    /// Adds the `1 × c` row vector `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (x, r) = (self.value(a), self.value(row));
        assert_eq!(r.shape(), (1, x.cols()), "add_row shape");
        let rd = r.data();
        let out = Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) + rd[j]);
        self.owned(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).scale(s);
        self.owned(out, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = ops::relu(self.value(a));
        self.owned(out, Op::Relu(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = ops::gelu(self.value(a));
        self.owned(out, Op::Gelu(a))
    }

    /// Row softmax over `allowed` entries; see [`ops::masked_row_softmax`].
    pub fn masked_softmax(&mut self, a: Var, allowed: &Arc<[bool]>) -> Var {
        let out = ops::masked_row_softmax(self.value(a), allowed);
        self.owned(out, Op::MaskedSoftmax(a))
    }

    pub fn layer_norm(&mut self, input: Var, gain: Var, bias: Var, eps: T) -> Var {
        let x = self.value(input);
        assert_eq!(self.value(gain).len(), x.cols(), "layer_norm gain");
        let ops::Normalized {
            normalized,
            inv_std,
        } = ops::normalize_rows(x, eps);
        let out = ops::affine_rows(&normalized, self.value(gain), self.value(bias));
        self.owned(
            out,
            Op::LayerNorm {
                input,
                gain,
                bias,
                normalized,
                inv_std,
            },
        )
    }

    /// Inverted dropout; identity (no node, no RNG draw) when not training or
    /// when `rate == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, training: bool, rng: &mut R) -> Var {
        if !training || rate == 0.0 {
            return a;
        }
        let (r, c) = self.value(a).shape();
        let mask = ops::dropout_mask(r, c, rate, rng);
        let out = self.value(a).hadamard(&mask).expect("dropout shape");
        self.owned(out, Op::Dropout { input: a, mask })
    }

    /// Row lookup: output row `t` is row `indices[t]` of `table`.
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Var {
        let t = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * t.cols());
        for &i in indices {
            data.extend_from_slice(t.row(i));
        }
        let out = Matrix::from_vec(indices.len(), t.cols(), data).unwrap();
        self.owned(
            out,
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let ms: Vec<&Matrix<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = ops::concat_cols(&ms).expect("tape concat_cols");
        self.owned(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, input: Var, start: usize, len: usize) -> Var {
        let out = self.value(input).slice_cols(start, len);
        self.owned(out, Op::SliceCols { input, start })
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let ms: Vec<&Matrix<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = ops::concat_rows(&ms).expect("tape concat_rows");
        self.owned(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, input: Var, start: usize, len: usize) -> Var {
        let out = self.value(input).slice_rows(start, len);
        self.owned(out, Op::SliceRows { input, start })
    }

    pub fn select_row(&mut self, input: Var, row: usize) -> Var {
        self.slice_rows(input, row, 1)
    }

    /// Row-major reshape to `1 × (rows·cols)`.
    pub fn flatten(&mut self, input: Var) -> Var {
        let m = self.value(input);
        let out = Matrix::row_vector(m.data().to_vec());
        self.owned(out, Op::Flatten(input))
    }

    /// Zeroes every row whose `keep` flag is false.
    pub fn mask_rows(&mut self, input: Var, keep: &[bool]) -> Var {
        let mut out = self.value(input).clone();
        assert_eq!(keep.len(), out.rows(), "mask_rows length");
        for (r, &k) in keep.iter().enumerate() {
            if !k {
                out.row_mut(r).fill(T::zero());
            }
        }
        self.owned(
            out,
            Op::MaskRows {
                input,
                keep: keep.to_vec(),
            },
        )
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).sum();
        self.owned(Matrix::filled(1, 1, s), Op::Sum(input))
    }

    /// Mean over `terms` of `-log softmax(logits[row])[target]`, with the
    /// optional excluded column removed from each normaliser. Max-shifted.
    pub fn cross_entropy(&mut self, logits: Var, terms: &[CeTerm]) -> Var {
        let l = self.value(logits);
        let mut probs = Matrix::zeros(l.rows(), l.cols());
        let mut total = T::zero();
        for term in terms {
            let row = l.row(term.row);
            let allowed = |j: usize| Some(j) != term.excluded;
            let max = row
                .iter()
                .enumerate()
                .filter(|(j, _)| allowed(*j))
                .map(|(_, &v)| v)
                .fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for (j, &v) in row.iter().enumerate() {
                if allowed(j) {
                    z = z + (v - max).exp();
                }
            }
            let log_z = z.ln() + max;
            total = total + (log_z - row[term.target]);
            for (j, &v) in row.iter().enumerate() {
                if allowed(j) {
                    let p = (v - log_z).exp();
                    let cur = probs.get(term.row, j);
                    probs.set(term.row, j, cur + p);
                }
            }
        }
        let n = T::from_usize(terms.len().max(1)).unwrap();
        self.owned(
            Matrix::filled(1, 1, total / n),
            Op::CrossEntropy {
                logits,
                terms: terms.to_vec(),
                probs,
            },
        )
    }

    /// Reverse sweep from `output`, seeded with ones.
    #[allow(clippy::needless_range_loop)]
    pub fn backward(&self, output: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let (r, c) = self.value(output).shape();
        grads[output.0] = Some(Matrix::filled(r, c, T::one()));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let out = node.value.get();
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads, *a, ops::matmul_nt_unchecked(&g, bv));
                    accumulate(&mut grads, *b, ops::matmul_tn_unchecked(av, &g));
                }
                Op::MatMulNT(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads, *a, ops::matmul_unchecked(&g, bv));
                    accumulate(&mut grads, *b, ops::matmul_tn_unchecked(&g, av));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, &v) in gr.data_mut().iter_mut().zip(g.row(i)) {
                            *o = *o + v;
                        }
                    }
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.scale(*s)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let dx = g.hadamard(&x.map(|v| if v > T::zero() { T::one() } else { T::zero() }));
                    accumulate(&mut grads, *a, dx.unwrap());
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    accumulate(&mut grads, *a, g.hadamard(&x.map(ops::gelu_grad)).unwrap());
                }
                Op::MaskedSoftmax(a) => {
                    let mut dx = Matrix::zeros(g.rows(), g.cols());
                    for i in 0..g.rows() {
                        let (y, gy) = (out.row(i), g.row(i));
                        let inner = ops::dot(y, gy);
                        for ((d, &yv), &gv) in dx.row_mut(i).iter_mut().zip(y).zip(gy) {
                            *d = yv * (gv - inner);
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::LayerNorm {
                    input,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    let gv = self.value(*gain).data();
                    let cols = g.cols();
                    let n = T::from_usize(cols).unwrap();
                    let mut dgain = Matrix::zeros(1, cols);
                    let mut dbias = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(g.rows(), cols);
                    for i in 0..g.rows() {
                        let (gy, xh) = (g.row(i), normalized.row(i));
                        let mut sum_dxh = T::zero();
                        let mut sum_dxh_xh = T::zero();
                        for j in 0..cols {
                            let dxh = gy[j] * gv[j];
                            sum_dxh = sum_dxh + dxh;
                            sum_dxh_xh = sum_dxh_xh + dxh * xh[j];
                            let dg = dgain.get(0, j) + gy[j] * xh[j];
                            dgain.set(0, j, dg);
                            let db = dbias.get(0, j) + gy[j];
                            dbias.set(0, j, db);
                        }
                        let scale = inv_std[i] / n;
                        for j in 0..cols {
                            let dxh = gy[j] * gv[j];
                            dx.set(i, j, scale * (n * dxh - sum_dxh - xh[j] * sum_dxh_xh));
                        }
                    }
                    accumulate(&mut grads, *gain, dgain);
                    accumulate(&mut grads, *bias, dbias);
                    accumulate(&mut grads, *input, dx);
                }
                Op::Dropout { input, mask } => {
                    accumulate(&mut grads, *input, g.hadamard(mask).unwrap());
                }
                Op::Gather { table, indices } => {
                    let (rows, cols) = self.value(*table).shape();
                    let mut dt = Matrix::zeros(rows, cols);
                    for (t, &i) in indices.iter().enumerate() {
                        for (o, &v) in dt.row_mut(i).iter_mut().zip(g.row(t)) {
                            *o = *o + v;
                        }
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        accumulate(&mut grads, p, g.slice_cols(offset, w));
                        offset += w;
                    }
                }
                Op::SliceCols { input, start } => {
                    let (rows, cols) = self.value(*input).shape();
                    let mut dx = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        dx.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let h = self.value(p).rows();
                        accumulate(&mut grads, p, g.slice_rows(offset, h));
                        offset += h;
                    }
                }
                Op::SliceRows { input, start } => {
                    let (rows, cols) = self.value(*input).shape();
                    let mut dx = Matrix::zeros(rows, cols);
                    dx.data_mut()[start * cols..(start + g.rows()) * cols].copy_from_slice(g.data());
                    accumulate(&mut grads, *input, dx);
                }
                Op::Flatten(input) => {
                    let (rows, cols) = self.value(*input).shape();
                    accumulate(
                        &mut grads,
                        *input,
                        Matrix::from_vec(rows, cols, g.into_data()).unwrap(),
                    );
                }
                Op::MaskRows { input, keep } => {
                    let mut dx = g;
                    for (r, &k) in keep.iter().enumerate() {
                        if !k {
                            dx.row_mut(r).fill(T::zero());
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::Sum(input) => {
                    let (rows, cols) = self.value(*input).shape();
                    accumulate(&mut grads, *input, Matrix::filled(rows, cols, g.get(0, 0)));
                }
                Op::CrossEntropy {
                    logits,
                    terms,
                    probs,
                } => {
                    let n = T::from_usize(terms.len().max(1)).unwrap();
                    let coef = g.get(0, 0) / n;
                    let mut dl = probs.scale(coef);
                    for term in terms {
                        let cur = dl.get(term.row, term.target);
                        dl.set(term.row, term.target, cur - coef);
                    }
                    accumulate(&mut grads, *logits, dl);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients produced by [`Tape::backward`]. Nodes the output does not
/// depend on have no entry.
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, or zeros of the given shape when unreachable.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}
