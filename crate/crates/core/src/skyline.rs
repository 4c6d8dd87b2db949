//! Envelope (skyline) Cholesky factorization for sparse symmetric positive
//! definite matrices.
//!
//! The lower triangle is stored row by row from the first structural
//! nonzero to the diagonal, so fill stays inside the envelope and every
//! inner product runs over contiguous memory. With lexicographic DOF
//! numbering on structured grids the envelope width is a few grid rows.

use std::ops::{Div, Mul, SubAssign};

use num_traits::Zero;

use crate::sparse::SparseMatrix;
use crate::{Result, TeigError};

#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    n: usize,
    /// First stored column of each row.
    first: Vec<usize>,
    /// Offset of `L[i][first[i]]` in `data`; row `i` ends at `start[i+1]`.
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factor `A = L L^T` using the lower triangle of `a`.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(TeigError::DimensionMismatch(format!("Cholesky of {}x{} matrix", n, a.n_cols())));
        }
        let first: Vec<usize> = (0..n).map(|i| a.row(i).map(|(j, _)| j).find(|&j| j <= i).unwrap_or(i).min(i)).collect();
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + (j - first[i])] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (head, row_i) = data.split_at_mut(start[i]);
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let rj = &head[start[j]..start[j + 1]];
                let li = &row_i[k0 - fi..j - fi];
                let lj = &rj[k0 - fj..j - fj];
                let dot: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let diag_j = rj[j - fj];
                row_i[j - fi] = (row_i[j - fi] - dot) / diag_j;
            }
            let off: f64 = row_i[..i - fi].iter().map(|v| v * v).sum();
            let d = row_i[i - fi] - off;
            if d.is_nan() || d <= 0.0 || d.is_infinite() {
                return Err(TeigError::NotPositiveDefinite { row: i, pivot: d });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(SkylineCholesky { n, first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L`.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solve `A x = b` in place for real or complex right-hand sides.
    pub fn solve_in_place<T>(&self, b: &mut [T])
    where
        T: Copy + Zero + SubAssign + Mul<f64, Output = T> + Div<f64, Output = T>,
    {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        // L y = b
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let mut acc = b[i];
            for (k, &l) in row[..i - fi].iter().enumerate() {
                acc -= b[fi + k] * l;
            }
            b[i] = acc / row[i - fi];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = b[i] / row[i - fi];
            b[i] = xi;
            for (k, &l) in row[..i - fi].iter().enumerate() {
                b[fi + k] -= xi * l;
            }
        }
    }

    pub fn solve<T>(&self, b: &[T]) -> Vec<T>
    where
        T: Copy + Zero + SubAssign + Mul<f64, Output = T> + Div<f64, Output = T>,
    {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve `A^T x = b`; identical to [`Self::solve`] since `A` is symmetric.
    pub fn solve_transpose<T>(&self, b: &[T]) -> Vec<T>
    where
        T: Copy + Zero + SubAssign + Mul<f64, Output = T> + Div<f64, Output = T>,
    {
        self.solve(b)
    }
}
