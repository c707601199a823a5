//! Forward primitives on [`Matrix`]. The tape in [`super::tape`] records
//! these and supplies their adjoints.

use rand::Rng;

use super::matrix::{Matrix, Real};
use crate::error::{Error, Result};

pub fn matmul<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols() != b.rows() {
        return Err(Error::dim(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(matmul_unchecked(a, b))
}

pub(crate) fn matmul_unchecked<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(n, m);
    let bd = b.data();
    let od = out.data_mut();
    for i in 0..n {
        let arow = a.row(i);
        let orow = &mut od[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate().take(k) {
            if av == T::zero() {
                continue;
            }
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// `a · bᵀ`.
pub fn matmul_nt<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols() != b.cols() {
        return Err(Error::dim(
            "matmul_nt",
            format!("{:?} x {:?}^T", a.shape(), b.shape()),
        ));
    }
    Ok(matmul_nt_unchecked(a, b))
}

pub(crate) fn matmul_nt_unchecked<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(a.rows(), b.rows(), |i, j| dot(a.row(i), b.row(j)))
}

/// `aᵀ · b`.
pub(crate) fn matmul_tn_unchecked<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (k, n, m) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(n, m);
    let od = out.data_mut();
    for p in 0..k {
        let arow = a.row(p);
        let brow = b.row(p);
        for (i, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let orow = &mut od[i * m..(i + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Max-shifted softmax over each row.
pub fn row_softmax<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    let allowed = vec![true; m.len()];
    masked_row_softmax(m, &allowed)
}

/// Row softmax restricted to `allowed` entries (row-major, same length as
/// `m`). Disallowed entries get probability zero; a row with no allowed entry
/// is all zeros.
pub fn masked_row_softmax<T: Real>(m: &Matrix<T>, allowed: &[bool]) -> Matrix<T> {
    assert_eq!(allowed.len(), m.len(), "mask length");
    let cols = m.cols();
    let mut out = Matrix::zeros(m.rows(), cols);
    for r in 0..m.rows() {
        let row = m.row(r);
        let mask = &allowed[r * cols..(r + 1) * cols];
        let max = row
            .iter()
            .zip(mask)
            .filter(|(_, &a)| a)
            .map(|(&v, _)| v)
            .fold(T::neg_infinity(), T::max);
        if max == T::neg_infinity() {
            continue;
        }
        let orow = out.row_mut(r);
        let mut total = T::zero();
        for ((o, &v), &a) in orow.iter_mut().zip(row).zip(mask) {
            if a {
                *o = (v - max).exp();
                total = total + *o;
            }
        }
        for o in orow.iter_mut() {
            *o = *o / total;
        }
    }
    out
}

/// Normalised rows and per-row inverse standard deviations, the state the
/// layer-norm adjoint needs.
pub(crate) struct Normalized<T> {
    pub(crate) normalized: Matrix<T>,
    pub(crate) inv_std: Vec<T>,
}

pub(crate) fn normalize_rows<T: Real>(m: &Matrix<T>, eps: T) -> Normalized<T> {
    let n = T::from_usize(m.cols()).unwrap();
    let mut normalized = Matrix::zeros(m.rows(), m.cols());
    let mut inv_std = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let row = m.row(r);
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let inv = T::one() / (var + eps).sqrt();
        for (o, &v) in normalized.row_mut(r).iter_mut().zip(row) {
            *o = (v - mean) * inv;
        }
        inv_std.push(inv);
    }
    Normalized {
        normalized,
        inv_std,
    }
}

pub(crate) fn affine_rows<T: Real>(x: &Matrix<T>, gain: &Matrix<T>, bias: &Matrix<T>) -> Matrix<T> {
    let (g, b) = (gain.data(), bias.data());
    Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) * g[j] + b[j])
}

/// Layer normalisation over the columns of each row (biased variance),
/// followed by the per-column affine map `gain ⊙ x̂ + bias`.
pub fn layer_norm<T: Real>(
    m: &Matrix<T>,
    gain: &Matrix<T>,
    bias: &Matrix<T>,
    eps: T,
) -> Result<Matrix<T>> {
    if gain.len() != m.cols() || bias.len() != m.cols() {
        return Err(Error::dim(
            "layer_norm",
            format!(
                "gain {} / bias {} for {} columns",
                gain.len(),
                bias.len(),
                m.cols()
            ),
        ));
    }
    let Normalized { normalized, .. } = normalize_rows(m, eps);
    Ok(affine_rows(&normalized, gain, bias))
}

/// Inverted-dropout multiplier: each entry is `0` with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub(crate) fn dropout_mask<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rate: f64,
    rng: &mut R,
) -> Matrix<T> {
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < rate {
            T::zero()
        } else {
            keep
        }
    })
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Inverted dropout. In eval mode, or with `rate == 0`, returns the input
/// unchanged without touching the generator.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    m: &Matrix<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Matrix<T>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(m.clone());
    }
    let mask = dropout_mask(m.rows(), m.cols(), rate, rng);
    m.hadamard(&mask)
}

pub fn concat_cols<T: Real>(parts: &[&Matrix<T>]) -> Result<Matrix<T>> {
    let rows = parts.first().map_or(0, |p| p.rows());
    if parts.iter().any(|p| p.rows() != rows) {
        return Err(Error::dim("concat_cols", "row counts differ"));
    }
    let cols = parts.iter().map(|p| p.cols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let mut offset = 0;
        for p in parts {
            out.row_mut(r)[offset..offset + p.cols()].copy_from_slice(p.row(r));
            offset += p.cols();
        }
    }
    Ok(out)
}

pub fn concat_rows<T: Real>(parts: &[&Matrix<T>]) -> Result<Matrix<T>> {
    let cols = parts.first().map_or(0, |p| p.cols());
    if parts.iter().any(|p| p.cols() != cols) {
        return Err(Error::dim("concat_rows", "column counts differ"));
    }
    let rows = parts.iter().map(|p| p.rows()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn relu<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    m.map(|v| v.max(T::zero()))
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    let (c, a, half) = (
        T::from_f64_lossy(GELU_C),
        T::from_f64_lossy(GELU_A),
        T::from_f64_lossy(0.5),
    );
    m.map(|x| half * x * (T::one() + (c * (x + a * x * x * x)).tanh()))
}

pub(crate) fn gelu_grad<T: Real>(x: T) -> T {
    let (c, a, half) = (
        T::from_f64_lossy(GELU_C),
        T::from_f64_lossy(GELU_A),
        T::from_f64_lossy(0.5),
    );
    let three = T::from_f64_lossy(3.0);
    let u = c * (x + a * x * x * x);
    let t = u.tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + three * a * x * x)
}
