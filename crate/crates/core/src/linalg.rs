//! Dense symmetric matrices, Cholesky factors and the block-inverse update.
//!
//! Both [`SymMatrix`] and [`CholFactor`] keep a packed lower triangle in
//! row-major order, so entry `(i, j)` with `i >= j` lives at
//! `i * (i + 1) / 2 + j`. Appending a row is a plain `extend` on the backing
//! vector, which is what lets the selection state grow its caches in upload
//! order without copying.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`cholesky`]: a pivot is rejected when it
/// is at most this fraction of the largest diagonal entry.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Absolute Schur-complement floor for [`extend_inverse`].
pub const SCHUR_FLOOR: f64 = 1e-12;

#[inline]
fn packed(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

#[inline]
fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Symmetric matrix with a single stored copy of each off-diagonal pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[packed(i, i)] = 1.0;
        }
        m
    }

    /// Builds the matrix from `f(i, j)`, which is only called with `i >= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds the matrix from row-major dense storage, requiring exact symmetry.
    pub fn from_dense(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j].to_bits() != entries[j * dim + i].to_bits() {
                    return Err(Error::Asymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| entries[i * dim + j]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.data[packed(i, j)]
        } else {
            self.data[packed(j, i)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let idx = if i >= j { packed(i, j) } else { packed(j, i) };
        self.data[idx] = value;
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[packed(i, 0)..=packed(i, i)];
            let mut acc = 0.0;
            for (j, &a) in row.iter().enumerate() {
                acc += a * v[j];
                if j < i {
                    out[j] += a * v[i];
                }
            }
            out[i] += acc;
        }
        out
    }

    /// `vᵀ M v`.
    pub fn quadratic(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim);
        let mut acc = 0.0;
        let mut rest = &self.data[..];
        for (i, &vi) in v.iter().enumerate() {
            let (row, tail) = rest.split_at(i + 1);
            rest = tail;
            let off: f64 = row[..i].iter().zip(&v[..i]).map(|(a, b)| a * b).sum();
            acc += vi * (2.0 * off + row[i] * vi);
        }
        acc
    }

    /// Principal submatrix on `indices`, rows kept in the order given.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |i, j| self.get(indices[i], indices[j]))
    }

    /// Entries `(row, indices[..])`, i.e. a cross-covariance vector.
    pub fn cross(&self, row: usize, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&j| self.get(row, j)).collect()
    }

    /// In-place block-inverse growth; see [`extend_inverse`].
    pub fn append_inverse(&mut self, new_row: &[f64], new_diag: f64) -> Result<()> {
        let (u, schur) = self.border_update(new_row, new_diag)?;
        self.commit_border(&u, schur);
        Ok(())
    }

    /// `(M⁻¹·c, d − cᵀ·M⁻¹·c)` for `self = M⁻¹`, rejecting a Schur
    /// complement at or below `SCHUR_FLOOR`. Does not modify `self`.
    pub(crate) fn border_update(&self, new_row: &[f64], new_diag: f64) -> Result<(Vec<f64>, f64)> {
        let l = self.dim;
        if new_row.len() != l {
            return Err(Error::DimensionMismatch { expected: l, found: new_row.len() });
        }
        let u = self.mul_vec(new_row);
        let dot: f64 = new_row.iter().zip(&u).map(|(a, b)| a * b).sum();
        let schur = new_diag - dot;
        if !(schur > SCHUR_FLOOR) {
            return Err(Error::SingularExtension { schur });
        }
        Ok((u, schur))
    }

    pub(crate) fn commit_border(&mut self, u: &[f64], schur: f64) {
        let l = self.dim;
        let inv_s = 1.0 / schur;
        for i in 0..l {
            let ui = u[i] * inv_s;
            let base = packed(i, 0);
            for j in 0..=i {
                self.data[base + j] += ui * u[j];
            }
        }
        self.data.extend(u.iter().map(|&x| -x * inv_s));
        self.data.push(inv_s);
        self.dim = l + 1;
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    dim: usize,
    data: Vec<f64>,
}

impl CholFactor {
    /// Factor of the 0×0 matrix, used when conditioning on nothing.
    pub fn empty() -> Self {
        Self { dim: 0, data: Vec::new() }
    }

    /// Wraps packed lower-triangular rows without any checks.
    ///
    /// `rows[i]` must hold exactly `i + 1` entries.
    pub fn from_lower_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(packed_len(rows.len()));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::DimensionMismatch { expected: i + 1, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim: rows.len(), data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)` of `L`; zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[packed(i, j)]
        }
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_fn(self.dim, |i, j| {
            let ri = &self.data[packed(i, 0)..=packed(i, i)];
            let rj = &self.data[packed(j, 0)..=packed(j, j)];
            ri.iter().zip(rj).map(|(a, b)| a * b).sum()
        })
    }

    /// Solves `L y = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.dim);
        let mut y = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let row = &self.data[packed(i, 0)..packed(i, i)];
            let s: f64 = row.iter().zip(&y).map(|(a, b)| a * b).sum();
            y.push((b[i] - s) / self.data[packed(i, i)]);
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward_solve(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.dim);
        let mut x = y.to_vec();
        for i in (0..self.dim).rev() {
            x[i] /= self.data[packed(i, i)];
            let xi = x[i];
            let row = &self.data[packed(i, 0)..packed(i, i)];
            for (j, &a) in row.iter().enumerate() {
                x[j] -= a * xi;
            }
        }
        x
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward_solve(&self.forward_solve(b))
    }

    /// `L·u`.
    pub fn mul_vec(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.data[packed(i, 0)..=packed(i, i)];
                row.iter().zip(u).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `ln det(L Lᵀ) = 2 Σ ln Lᵢᵢ`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| libm::log(self.data[packed(i, i)])).sum::<f64>()
    }

    /// Appends a row so that the factor covers the matrix bordered by
    /// `cross` (new off-diagonal column) and `diag`.
    ///
    /// `threshold` is the absolute floor for the new pivot before its square
    /// root is taken.
    pub fn push_row(&mut self, cross: &[f64], diag: f64, threshold: f64) -> Result<()> {
        let (w, pivot) = self.next_row(cross, diag, threshold)?;
        self.commit_row(w, pivot);
        Ok(())
    }

    /// Off-diagonal part and squared pivot of the row that `push_row` would
    /// append. Does not modify `self`.
    pub(crate) fn next_row(&self, cross: &[f64], diag: f64, threshold: f64) -> Result<(Vec<f64>, f64)> {
        if cross.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: cross.len() });
        }
        let w = self.forward_solve(cross);
        let pivot = diag - w.iter().map(|x| x * x).sum::<f64>();
        if !(pivot > threshold) {
            return Err(Error::NotPositiveDefinite { row: self.dim, pivot, threshold });
        }
        Ok((w, pivot))
    }

    pub(crate) fn commit_row(&mut self, w: Vec<f64>, pivot: f64) {
        self.data.extend_from_slice(&w);
        self.data.push(libm::sqrt(pivot));
        self.dim += 1;
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Rejects the matrix when any pivot falls to `PIVOT_RTOL` times the largest
/// diagonal entry or below.
pub fn cholesky(m: &SymMatrix) -> Result<CholFactor> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    let max_diag = m.max_diagonal();
    let threshold = PIVOT_RTOL * max_diag;
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return Err(Error::NotPositiveDefinite { row: 0, pivot: m.get(0, 0), threshold });
    }
    let mut data = vec![0.0; packed_len(n)];
    for i in 0..n {
        for j in 0..=i {
            let ri = &data[packed(i, 0)..packed(i, 0) + j];
            let rj = &data[packed(j, 0)..packed(j, 0) + j];
            let s: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            let v = m.get(i, j) - s;
            if i == j {
                if !(v > threshold) {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: v, threshold });
                }
                data[packed(i, i)] = libm::sqrt(v);
            } else {
                data[packed(i, j)] = v / data[packed(j, j)];
            }
        }
    }
    Ok(CholFactor { dim: n, data })
}

/// Grows `inv_l = A⁻¹` to the inverse of `[[A, row], [rowᵀ, diag]]` with
/// O(l²) work, placing the new index last.
pub fn extend_inverse(inv_l: &SymMatrix, new_row: &[f64], new_diag: f64) -> Result<SymMatrix> {
    let mut out = inv_l.clone();
    out.append_inverse(new_row, new_diag)?;
    Ok(out)
}

/// `vᵀ R⁻¹ v` through one triangular solve on `chol = chol(R)`.
pub fn quad_form(v: &[f64], chol: &CholFactor) -> Result<f64> {
    if v.len() != chol.dim() {
        return Err(Error::DimensionMismatch { expected: chol.dim(), found: v.len() });
    }
    Ok(chol.forward_solve(v).iter().map(|x| x * x).sum())
}

/// `ln det R` from its factor.
pub fn log_det(chol: &CholFactor) -> f64 {
    chol.log_det()
}
