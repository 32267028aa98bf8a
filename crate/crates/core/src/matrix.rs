//! Dense symmetric working matrix.
//!
//! Storage is a row-major `N x N` buffer. Only the lower triangle (including
//! the diagonal) is authoritative; factorizations overwrite it in place with
//! the Cholesky factor and may leave scratch values in the upper triangle.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from its lower triangle; `f(i, j)` is called for `j <= i`
    /// and the value is mirrored into the upper triangle.
    pub fn from_lower_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    /// Builds a matrix from full rows. The lower triangle is kept and mirrored;
    /// the input must be square but need not be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::input("matrix rows must form a square array"));
        }
        Ok(Self::from_lower_fn(dim, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Reads the symmetric entry `(i, j)` from the authoritative lower triangle.
    #[inline]
    pub fn sym(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.get(i, j)
        } else {
            self.get(j, i)
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.get(i, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Full row `i` of the backing buffer.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Lower-triangular part of row `i`, columns `0..=i`.
    pub fn lower_row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..i * self.dim + i + 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Leading `n x n` principal submatrix.
    pub fn leading(&self, n: usize) -> SymMatrix {
        let n = n.min(self.dim);
        Self::from_lower_fn(n, |i, j| self.get(i, j))
    }

    /// Copies the lower triangle into a dense matrix with zeros above the diagonal.
    pub fn lower_triangle(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| if j <= i { self.get(i, j) } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Maximum absolute row sum of the symmetric matrix described by the lower triangle.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.sym(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Whether the materialized upper triangle mirrors the lower one exactly.
    pub fn is_mirrored(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Reconstructs `C C^T` from a lower-triangular factor stored in `factor`.
pub fn reconstruct_from_factor(factor: &SymMatrix) -> SymMatrix {
    SymMatrix::from_lower_fn(factor.dim(), |i, j| {
        let (ri, rj) = (factor.lower_row(i), factor.lower_row(j));
        ri[..=j].iter().zip(&rj[..=j]).map(|(a, b)| a * b).sum()
    })
}
