//! Dense complex tensors.
//!
//! A [`ComplexTensor`] stores its elements in row-major order over the listed
//! axes: the last axis varies fastest. Reshapes only rewrite the shape vector;
//! permutations and contractions produce new row-major buffers. Every other
//! module relies on this single layout convention, so golden values are stable
//! across platforms.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexTensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("tensor data contains NaN or Inf".into()));
        }
        Ok(Self { shape, data })
    }

    /// Construction without the finiteness scan, for data produced internally
    /// from finite inputs.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![ZERO; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    /// Rank-2 tensor from rows of equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(vec![m, n], rows.concat())
    }

    /// Rank-2 tensor from real rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Column vector (n×1).
    pub fn column(values: &[C64]) -> Result<Self> {
        Self::new(vec![values.len(), 1], values.to_vec())
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let n = values.len();
        let mut t = Self::zeros(vec![n, n]);
        for (i, v) in values.iter().enumerate() {
            t.data[i * n + i] = *v;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(Error::Dimension(format!(
                "index of rank {} into tensor of rank {}",
                index.len(),
                self.shape.len()
            )));
        }
        let mut off = 0;
        for (&i, &n) in index.iter().zip(&self.shape) {
            if i >= n {
                return Err(Error::OutOfRange { index: i, len: n });
            }
            off = off * n + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<C64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: C64) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    /// Element (i, j) of a rank-2 tensor; panics when out of bounds.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Pure metadata change; the element count must be preserved.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub(crate) fn reshaped(self, shape: Vec<usize>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), self.data.len());
        Self {
            shape,
            data: self.data,
        }
    }

    /// Reorders axes: axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let r = self.shape.len();
        let mut seen = vec![false; r];
        if axes.len() != r
            || axes
                .iter()
                .any(|&a| a >= r || std::mem::replace(&mut seen[a], true))
        {
            return Err(Error::Dimension(format!(
                "{axes:?} is not a permutation of {r} axes"
            )));
        }
        Ok(self.permuted(axes))
    }

    pub(crate) fn permuted(&self, axes: &[usize]) -> Self {
        let r = self.shape.len();
        if axes.iter().enumerate().all(|(i, &a)| i == a) {
            return self.clone();
        }
        let mut in_strides = vec![1usize; r];
        for k in (0..r.saturating_sub(1)).rev() {
            in_strides[k] = in_strides[k + 1] * self.shape[k + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return Self::from_raw(out_shape, out);
        }
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for _ in 0..n {
            out.push(self.data[src]);
            // odometer increment over the output index
            let mut k = r;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                src += strides[k];
                if idx[k] < out_shape[k] {
                    break;
                }
                src -= strides[k] * out_shape[k];
                idx[k] = 0;
            }
        }
        Self::from_raw(out_shape, out)
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(
            self.shape.clone(),
            self.data.iter().map(|z| z.conj()).collect(),
        )
    }

    /// Conjugate transpose of a rank-2 tensor.
    pub fn dagger(&self) -> Result<Self> {
        self.expect_rank2("dagger")?;
        Ok(self.permuted(&[1, 0]).conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_raw(
            self.shape.clone(),
            self.data.iter().map(|z| z * s).collect(),
        )
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "elementwise op on {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Self::from_raw(
            self.shape.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Result<C64> {
        self.expect_square("trace")?;
        let n = self.shape[0];
        Ok((0..n).map(|i| self.data[i * n + i]).sum())
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.expect_rank2("matmul")?;
        other.expect_rank2("matmul")?;
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::Dimension(format!("matmul {m}×{k} by {k2}×{n}")));
        }
        Ok(Self::from_raw(
            vec![m, n],
            gemm(&self.data, &other.data, m, k, n),
        ))
    }

    pub(crate) fn expect_rank2(&self, what: &str) -> Result<()> {
        if self.shape.len() != 2 {
            return Err(Error::Dimension(format!(
                "{what} needs a rank-2 tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_square(&self, what: &str) -> Result<()> {
        self.expect_rank2(what)?;
        if self.shape[0] != self.shape[1] {
            return Err(Error::Dimension(format!(
                "{what} needs a square matrix, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

/// Row-major `m×k` times `k×n`.
pub(crate) fn gemm(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut c = vec![ZERO; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == ZERO {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aip * bj;
            }
        }
    }
    c
}

/// Sums over the paired axes of `a` and `b`.
///
/// The result carries the uncontracted axes of `a` (in order) followed by the
/// uncontracted axes of `b`.
pub fn contract(
    a: &ComplexTensor,
    b: &ComplexTensor,
    axis_pairs: &[(usize, usize)],
) -> Result<ComplexTensor> {
    let (ra, rb) = (a.rank(), b.rank());
    let mut used_a = vec![false; ra];
    let mut used_b = vec![false; rb];
    for &(ia, ib) in axis_pairs {
        if ia >= ra || ib >= rb {
            return Err(Error::Dimension(format!(
                "axis pair ({ia}, {ib}) out of range for ranks {ra} and {rb}"
            )));
        }
        if used_a[ia] || used_b[ib] {
            return Err(Error::Dimension("axis paired twice".into()));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dimension(format!(
                "paired axes have extents {} and {}",
                a.shape[ia], b.shape[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..ra).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..rb).filter(|&i| !used_b[i]).collect();

    let perm_a: Vec<usize> = free_a
        .iter()
        .copied()
        .chain(axis_pairs.iter().map(|p| p.0))
        .collect();
    let perm_b: Vec<usize> = axis_pairs
        .iter()
        .map(|p| p.1)
        .chain(free_b.iter().copied())
        .collect();

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axis_pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();

    let pa = a.permuted(&perm_a);
    let pb = b.permuted(&perm_b);
    let data = gemm(&pa.data, &pb.data, m, k, n);

    let shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&i| b.shape[i]))
        .collect();
    Ok(ComplexTensor::from_raw(shape, data))
}

/// Kronecker product of two rank-2 tensors (vectors as n×1).
pub fn kron(a: &ComplexTensor, b: &ComplexTensor) -> Result<ComplexTensor> {
    a.expect_rank2("kron")?;
    b.expect_rank2("kron")?;
    let (ma, na) = (a.shape[0], a.shape[1]);
    let (mb, nb) = (b.shape[0], b.shape[1]);
    let (m, n) = (ma * mb, na * nb);
    let mut data = vec![ZERO; m * n];
    for i in 0..ma {
        for j in 0..na {
            let aij = a.data[i * na + j];
            if aij == ZERO {
                continue;
            }
            for p in 0..mb {
                let row = (i * mb + p) * n + j * nb;
                for q in 0..nb {
                    data[row + q] = aij * b.data[p * nb + q];
                }
            }
        }
    }
    Ok(ComplexTensor::from_raw(vec![m, n], data))
}

/// Kronecker product of a list of square operators, left factor most significant.
pub fn kron_all(ops: &[&ComplexTensor]) -> Result<ComplexTensor> {
    let mut acc = ComplexTensor::identity(1);
    for op in ops {
        acc = kron(&acc, op)?;
    }
    Ok(acc)
}
