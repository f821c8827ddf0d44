// SPDX-License-Identifier: Apache-2.0

//! Dense symmetric matrices, Cholesky factors and the correlation transform.
//!
//! Matrices here are small (p up to a few hundred) and dense, so everything is
//! stored row-major in a flat `Vec<f64>`. Symmetric matrices keep both halves
//! so that row access stays contiguous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold for Cholesky: a pivot below this fraction of the
/// largest diagonal entry is treated as a failure.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// A real symmetric `dim × dim` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting anything that is not
    /// exactly symmetric.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    /// Symmetrizes arbitrary row-major data by averaging mirrored entries.
    pub(crate) fn from_upper_unchecked(dim: usize, mut data: Vec<f64>) -> Self {
        for i in 0..dim {
            for j in (i + 1)..dim {
                data[j * dim + i] = data[i * dim + j];
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets entry `(i, j)` and its mirror.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Adds `value` to every diagonal entry.
    pub fn shift_diagonal(&self, value: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.data[i * self.dim + i] += value;
        }
        m
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inverse(&self) -> Result<Self> {
        cholesky(self)?.inverse_of_product()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Lower-triangular matrix stored densely, zeros above the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let mut data = data;
        for i in 0..dim {
            for j in (i + 1)..dim {
                data[i * dim + j] = 0.0;
            }
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row `i` up to and including the diagonal.
    #[inline]
    pub fn row_lower(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..i * self.dim + i + 1]
    }

    /// `out = L · z`.
    pub fn mul_vec_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self
                .row_lower(i)
                .iter()
                .zip(z)
                .map(|(l, v)| l * v)
                .sum();
        }
    }

    /// `L · Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let p = self.dim;
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let ri = self.row_lower(i);
                let rj = self.row_lower(j);
                data[i * p + j] = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            }
        }
        SymMatrix::from_upper_unchecked(p, data)
    }

    /// Inverse of the triangular factor, itself lower triangular.
    pub fn inverse(&self) -> LowerTriangular {
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        invert_lower_into(&self.data, &mut out, &mut vec![0.0; p], p);
        LowerTriangular { dim: p, data: out }
    }

    /// `(L · Lᵀ)⁻¹ = L⁻ᵀ · L⁻¹`.
    pub fn inverse_of_product(&self) -> Result<SymMatrix> {
        let p = self.dim;
        let inv = self.inverse();
        let mut data = vec![0.0; p * p];
        gram_lower_into(&inv.data, &mut data, p);
        Ok(SymMatrix::from_upper_unchecked(p, data))
    }
}

/// Cholesky factorization `m = L Lᵀ`.
///
/// Fails with [`Error::NotPositiveDefinite`] when a pivot drops to or below
/// [`PIVOT_TOLERANCE`] times the largest diagonal entry. No jitter is added.
pub fn cholesky(m: &SymMatrix) -> Result<LowerTriangular> {
    let p = m.dim();
    let max_diag = (0..p).map(|i| m.get(i, i)).fold(0.0_f64, f64::max);
    let threshold = PIVOT_TOLERANCE * max_diag;
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let row_j = &l[j * p..j * p + j];
        let pivot = m.get(j, j) - row_j.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > threshold) || max_diag <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        l[j * p + j] = diag;
        for i in (j + 1)..p {
            let dot: f64 = (0..j).map(|k| l[i * p + k] * l[j * p + k]).sum();
            l[i * p + j] = (m.get(i, j) - dot) / diag;
        }
    }
    Ok(LowerTriangular { dim: p, data: l })
}

/// Correlation matrix `D^{-1/2} Σ D^{-1/2}` with `D = diag(Σ)`.
pub fn cov_to_corr(sigma: &SymMatrix) -> Result<SymMatrix> {
    let p = sigma.dim();
    let mut inv_sd = Vec::with_capacity(p);
    for i in 0..p {
        let v = sigma.get(i, i);
        if !(v > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: i, value: v });
        }
        inv_sd.push(1.0 / v.sqrt());
    }
    let mut data = vec![0.0; p * p];
    for i in 0..p {
        data[i * p + i] = 1.0;
        for j in (i + 1)..p {
            data[i * p + j] = (sigma.get(i, j) * inv_sd[i] * inv_sd[j]).clamp(-1.0, 1.0);
        }
    }
    Ok(SymMatrix::from_upper_unchecked(p, data))
}

/// Number of strictly upper-triangular entries, `p(p-1)/2`.
#[inline]
pub const fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in the row-major strict upper
/// triangle: `(0,1), (0,2), …, (0,p-1), (1,2), …`. Indices are 0-based.
#[inline]
pub const fn pair_index(p: usize, i: usize, j: usize) -> usize {
    i * p - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_of(p: usize, index: usize) -> (usize, usize) {
    debug_assert!(index < pair_count(p));
    let mut i = 0;
    let mut start = 0;
    loop {
        let row_len = p - i - 1;
        if index < start + row_len {
            return (i, i + 1 + index - start);
        }
        start += row_len;
        i += 1;
    }
}

/// Recovers `p` from `d = p(p-1)/2`, if `d` is such a number.
pub fn dim_from_pair_count(d: usize) -> Option<usize> {
    let p = ((1.0 + (1.0 + 8.0 * d as f64).sqrt()) / 2.0).round() as usize;
    (pair_count(p) == d && p >= 2).then_some(p)
}

/// Strict upper-triangular vectorization of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Vech0Vector {
    p: usize,
    values: Vec<f64>,
}

impl Vech0Vector {
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != pair_count(p) {
            return Err(Error::DimensionMismatch {
                expected: pair_count(p),
                got: values.len(),
            });
        }
        Ok(Self { p, values })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            values: vec![0.0; pair_count(p)],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub fn vech0(m: &SymMatrix) -> Vech0Vector {
    let p = m.dim();
    let mut values = Vec::with_capacity(pair_count(p));
    for i in 0..p {
        values.extend_from_slice(&m.row(i)[i + 1..]);
    }
    Vech0Vector { p, values }
}

/// Rebuilds the symmetric matrix with unit diagonal.
pub fn unvech0(v: &Vech0Vector) -> SymMatrix {
    let p = v.p;
    let mut m = SymMatrix::identity(p);
    let mut k = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            m.set(i, j, v.values[k]);
            k += 1;
        }
    }
    m
}

// Kernels on raw row-major buffers, shared with the samplers.

/// `out = L⁻¹` for lower-triangular `l` (row-major, `p × p`).
pub(crate) fn invert_lower_into(l: &[f64], out: &mut [f64], acc: &mut [f64], p: usize) {
    for i in 0..p {
        let acc = &mut acc[..i];
        acc.fill(0.0);
        for k in 0..i {
            let b = l[i * p + k];
            if b != 0.0 {
                let row = &out[k * p..k * p + k + 1];
                for (a, h) in acc[..=k].iter_mut().zip(row) {
                    *a += b * h;
                }
            }
        }
        let inv_diag = 1.0 / l[i * p + i];
        let row = &mut out[i * p..(i + 1) * p];
        for (o, a) in row[..i].iter_mut().zip(acc.iter()) {
            *o = -a * inv_diag;
        }
        row[i] = inv_diag;
        row[i + 1..].fill(0.0);
    }
}

/// Upper triangle of `Hᵀ H` for lower-triangular `h`, written into `out`.
pub(crate) fn gram_lower_into(h: &[f64], out: &mut [f64], p: usize) {
    out.fill(0.0);
    for k in 0..p {
        let row = &h[k * p..k * p + k + 1];
        for i in 0..=k {
            let hi = row[i];
            if hi == 0.0 {
                continue;
            }
            let dst = &mut out[i * p + i..i * p + k + 1];
            for (o, hj) in dst.iter_mut().zip(&row[i..]) {
                *o += hi * hj;
            }
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
