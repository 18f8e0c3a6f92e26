//! Dense row-major design matrices.
//!
//! Products accumulate in a fixed order so results are bitwise reproducible
//! for a given input, whatever thread runs them.

use crate::error::{check_len, invalid, Result, SlopeError};

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Design {
    /// `data` is row-major, `n * p` entries.
    pub fn new(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(invalid("design", "n and p must be at least 1"));
        }
        check_len(n * p, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SlopeError::NonFinite("design"));
        }
        Ok(Design { n, p, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for row in rows {
            check_len(p, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(n, p, data)
    }

    pub fn identity(p: usize) -> Result<Self> {
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            data[i * p + i] = 1.0;
        }
        Self::new(p, p, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.p];
        for i in 0..self.n {
            for (s, v) in sq.iter_mut().zip(self.row(i)) {
                *s += v * v;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Submatrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Design> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.p) {
            return Err(SlopeError::IndexOutOfRange { index: bad, dim: self.p });
        }
        let mut data = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Design::new(self.n, cols.len(), data)
    }

    /// `X b`.
    pub fn mul_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(b, &mut out);
        out
    }

    pub fn mul_vec_into(&self, b: &[f64], out: &mut [f64]) {
        debug_assert_eq!(b.len(), self.p);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), b);
        }
    }

    /// `X' v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.tr_mul_vec_into(v, &mut out);
        out
    }

    pub fn tr_mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        out.fill(0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
    }

    /// Power-iteration estimate of the largest eigenvalue of `X'X`.
    pub fn gram_spectral_radius(&self, iterations: usize) -> f64 {
        // a deterministic start with no special alignment
        let mut v: Vec<f64> = (0..self.p).map(|j| 1.0 + (j % 7) as f64 * 0.1).collect();
        let mut estimate = 0.0;
        for _ in 0..iterations.max(1) {
            let norm = norm2(&v);
            if norm == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let w = self.tr_mul_vec(&self.mul_vec(&v));
            estimate = dot(&v, &w);
            v = w;
        }
        estimate
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `m x m`)
/// by Cholesky factorization; `None` if `A` is not numerically positive definite.
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    debug_assert_eq!(a.len(), m * m);
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let s = a[i * m + j] - dot(&l[i * m..i * m + j], &l[j * m..j * m + j]);
            if i == j {
                if !(s > 1e-12 * a[i * m + i].abs()) {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..m {
        x[i] = (x[i] - dot(&l[i * m..i * m + i], &x[..i])) / l[i * m + i];
    }
    for i in (0..m).rev() {
        let s: f64 = ((i + 1)..m).map(|k| l[k * m + i] * x[k]).sum();
        x[i] = (x[i] - s) / l[i * m + i];
    }
    Some(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm2(a: &[f64]) -> f64 {
    norm2_sq(a).sqrt()
}
