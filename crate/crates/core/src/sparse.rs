//! Row-compressed sparse matrices and the ILU(0) factorization used as the
//! Krylov preconditioner.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: alloc::vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[span.clone()].binary_search(&j) {
            Ok(p) => self.values[span.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.values[p] * x[self.col_indices[p]];
            }
            y[i] = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// First row with no nonzero entry, if any.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.n).find(|&i| self.row(i).all(|(_, v)| v == 0.0))
    }

    /// Applies `f(row, col, value) -> value` to every stored entry.
    pub fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for p in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.values[p] = f(i, self.col_indices[p], self.values[p]);
            }
        }
        out
    }
}

/// Accumulates triplets row by row; duplicate columns are summed.
#[derive(Debug, Clone)]
pub struct RowBuilder {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    scratch: Vec<(usize, f64)>,
}

impl RowBuilder {
    pub fn new(n: usize) -> Self {
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        Self { n, row_offsets, col_indices: Vec::new(), values: Vec::new(), scratch: Vec::new() }
    }

    pub fn push(&mut self, col: usize, value: f64) {
        debug_assert!(col < self.n);
        self.scratch.push((col, value));
    }

    /// Closes the current row. The diagonal is always stored, even if zero.
    pub fn finish_row(&mut self) {
        let row = self.row_offsets.len() - 1;
        self.scratch.push((row, 0.0));
        self.scratch.sort_by_key(|e| e.0);
        let mut last = usize::MAX;
        for &(c, v) in &self.scratch {
            if c == last {
                *self.values.last_mut().unwrap() += v;
            } else {
                self.col_indices.push(c);
                self.values.push(v);
                last = c;
            }
        }
        self.scratch.clear();
        self.row_offsets.push(self.col_indices.len());
    }

    pub fn build(self) -> CsrMatrix {
        assert_eq!(self.row_offsets.len(), self.n + 1, "not every row was finished");
        CsrMatrix { n: self.n, row_offsets: self.row_offsets, col_indices: self.col_indices, values: self.values }
    }
}

/// Incomplete LU with the sparsity pattern of the matrix itself.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    factors: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut f = a.clone();
        let mut diag_pos = alloc::vec![usize::MAX; n];
        for i in 0..n {
            for p in f.row_offsets[i]..f.row_offsets[i + 1] {
                if f.col_indices[p] == i {
                    diag_pos[i] = p;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(Error::SingularRow(i));
            }
        }
        // column -> position lookup for the row being eliminated
        let mut pos = alloc::vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (f.row_offsets[i], f.row_offsets[i + 1]);
            for p in start..end {
                pos[f.col_indices[p]] = p;
            }
            for p in start..end {
                let k = f.col_indices[p];
                if k >= i {
                    break;
                }
                let pivot = f.values[diag_pos[k]];
                let lik = f.values[p] / pivot;
                f.values[p] = lik;
                for q in diag_pos[k] + 1..f.row_offsets[k + 1] {
                    let j = f.col_indices[q];
                    let target = pos[j];
                    if target != usize::MAX {
                        f.values[target] -= lik * f.values[q];
                    }
                }
            }
            for p in start..end {
                pos[f.col_indices[p]] = usize::MAX;
            }
            if f.values[diag_pos[i]] == 0.0 {
                // keep the factorization usable; the Krylov loop still sees the true matrix
                f.values[diag_pos[i]] = 1.0;
            }
        }
        Ok(Self { factors: f, diag_pos })
    }

    /// Solves `L U z = r` in place.
    pub fn apply(&self, z: &mut [f64]) {
        let f = &self.factors;
        for i in 0..f.n {
            let mut s = z[i];
            for p in f.row_offsets[i]..self.diag_pos[i] {
                s -= f.values[p] * z[f.col_indices[p]];
            }
            z[i] = s;
        }
        for i in (0..f.n).rev() {
            let mut s = z[i];
            for p in self.diag_pos[i] + 1..f.row_offsets[i + 1] {
                s -= f.values[p] * z[f.col_indices[p]];
            }
            z[i] = s / f.values[self.diag_pos[i]];
        }
    }
}
