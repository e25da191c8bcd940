//! Sparse and banded linear algebra used by the channel and solver layers.
//!
//! Observables on a window of dimension `d` are vectorized by column
//! stacking: entry `(i, j)` sits at position `i + j * d`. This matches the
//! column-major storage of [`nalgebra::DMatrix`], so `as_slice` is `vec`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{Float, Zero};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Position of matrix entry `(row, col)` in the column-stacked vector.
#[inline]
pub fn vec_index(row: usize, col: usize, dim: usize) -> usize {
    row + col * dim
}

/// Inverse of [`vec_index`].
#[inline]
pub fn unvec_index(k: usize, dim: usize) -> (usize, usize) {
    (k % dim, k / dim)
}

pub fn vectorize(m: &CMatrix) -> Vec<C64> {
    m.as_slice().to_vec()
}

pub fn unvectorize(v: &[C64], dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v)
}

/// Compressed sparse column matrix with complex entries.
///
/// Explicit zeros are kept so that matrices built from the same stencil
/// share a sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|t| (t.1, t.0));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
            last = Some((r, c));
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self { nrows, ncols, col_ptr, row_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    /// True when both matrices store entries at the same positions.
    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }

    /// Stored entries of column `col` as `(row, value)` pairs.
    pub fn column(&self, col: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.col_ptr[col]..self.col_ptr[col + 1];
        self.row_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let span = self.col_ptr[col]..self.col_ptr[col + 1];
        match self.row_idx[span.clone()].binary_search(&row) {
            Ok(k) => self.values[span.start + k],
            Err(_) => C64::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![C64::zero(); self.nrows];
        for (c, &xc) in x.iter().enumerate() {
            if xc == C64::zero() {
                continue;
            }
            for (r, v) in self.column(c) {
                y[r] += v * xc;
            }
        }
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                trip.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows, self.ncols);
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for c in 0..self.ncols {
            for (r, _) in self.column(c) {
                if r > c {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub(crate) fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                out.push((r, c, v));
            }
        }
        out
    }
}

/// LU factorization with partial pivoting of a square banded matrix.
///
/// Storage follows the usual band layout: column `j` keeps rows
/// `j - kl - ku ..= j + kl`, leaving room for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<C64>,
    piv: Vec<usize>,
}

impl BandedLu {
    /// Factors `a + shift * I`.
    pub fn factor_shifted(a: &SparseMatrix, shift: C64) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let ld = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, ld, ab: vec![C64::zero(); ld * n], piv: vec![0; n] };
        for c in 0..n {
            for (r, v) in a.column(c) {
                *lu.at(r, c) += v;
            }
            *lu.at(c, c) += shift;
        }
        lu.factor()?;
        Ok(lu)
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        c * self.ld + self.kl + self.ku + r - c
    }

    #[inline]
    fn at(&mut self, r: usize, c: usize) -> &mut C64 {
        let k = self.offset(r, c);
        &mut self.ab[k]
    }

    fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for j in 0..n {
            let imax = (j + kl).min(n - 1);
            let cmax = (j + kl + ku).min(n - 1);
            let mut p = j;
            let mut best = self.ab[self.offset(j, j)].norm();
            for i in j + 1..=imax {
                let v = self.ab[self.offset(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[j] = p;
            if best == 0.0 {
                return Err(Error::Singular(j));
            }
            if p != j {
                for c in j..=cmax {
                    let (a, b) = (self.offset(j, c), self.offset(p, c));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.offset(j, j)];
            for i in j + 1..=imax {
                let k = self.offset(i, j);
                self.ab[k] /= pivot;
            }
            for c in j + 1..=cmax {
                let u = self.ab[self.offset(j, c)];
                if u == C64::zero() {
                    continue;
                }
                for i in j + 1..=imax {
                    let l = self.ab[self.offset(i, j)];
                    let k = self.offset(i, c);
                    self.ab[k] -= l * u;
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(b.len(), n);
        for j in 0..n {
            b.swap(j, self.piv[j]);
            let bj = b[j];
            if bj == C64::zero() {
                continue;
            }
            for i in j + 1..=(j + kl).min(n - 1) {
                b[i] -= self.ab[self.offset(i, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.offset(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(kl + ku)..j {
                b[i] -= self.ab[self.offset(i, j)] * bj;
            }
        }
    }
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

/// Largest absolute eigenvalue of the Hermitian part (operator norm for
/// Hermitian input).
pub fn hermitian_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Trace norm, the sum of singular values.
///
/// Hermitian input (the common case: differences of states) takes the
/// cheaper eigenvalue route; singular values of a Hermitian matrix are the
/// moduli of its eigenvalues.
pub fn trace_norm(m: &CMatrix) -> f64 {
    let scale = m.iter().fold(0.0, |acc: f64, v| acc.max(v.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    let skew = (m - m.adjoint()).iter().fold(0.0, |acc: f64, v| acc.max(v.norm()));
    if skew <= 1e-14 * scale {
        hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
    } else {
        m.clone().singular_values().iter().sum()
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc: f64, v| acc.max(v.norm()))
}

/// Least-squares line `y = a + b x`; returns `(a, b, rms residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(xi, yi)| { let e = yi - a - b * xi; e * e }).sum();
    Some((a, b, (rss / nf).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vec_index_is_column_major() {
        let mut m = CMatrix::zeros(3, 3);
        m[(2, 1)] = c(5.0, 0.0);
        let v = vectorize(&m);
        assert_eq!(v[vec_index(2, 1, 3)], c(5.0, 0.0));
        assert_eq!(unvec_index(vec_index(2, 1, 3), 3), (2, 1));
        assert_eq!(unvectorize(&v, 3), m);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let s = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 1.0)), (1, 0, c(3.0, 0.0))]);
        assert_eq!(s.get(0, 1), c(3.0, 1.0));
        assert_eq!(s.get(1, 0), c(3.0, 0.0));
        assert_eq!(s.get(1, 1), C64::zero());
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.adjoint().get(1, 0), c(3.0, -1.0));
    }

    fn random_banded(rng: &mut ChaCha8Rng, n: usize, kl: usize, ku: usize) -> SparseMatrix {
        let mut trip = Vec::new();
        for col in 0..n {
            for row in col.saturating_sub(ku)..=(col + kl).min(n - 1) {
                if rng.gen_bool(0.7) {
                    trip.push((row, col, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, trip)
    }

    #[test]
    fn banded_lu_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (6, 1, 2), (30, 4, 3), (50, 7, 7)] {
            let a = random_banded(&mut rng, n, kl, ku);
            let shift = c(0.3, 0.1);
            let lu = BandedLu::factor_shifted(&a, shift).unwrap();
            let b: Vec<C64> = (0..n).map(|_| c(rng.gen(), rng.gen())).collect();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            let dense = a.to_dense() + CMatrix::identity(n, n) * shift;
            let r = dense * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
            assert!(r.norm() < 1e-9, "residual {} at n={n}", r.norm());
        }
    }

    #[test]
    fn trace_norm_of_hermitian_and_general() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-2.0, 0.0)]);
        assert!((trace_norm(&m) - 3.0).abs() < 1e-14);
        let n = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((trace_norm(&n) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (a, b, r) = fit_line(&x, &y).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12 && r < 1e-12);
    }
}
