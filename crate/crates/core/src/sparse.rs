//! Compressed sparse row matrices with real entries.

use std::io::Write as _;
use std::ops::{Add, Mul};
use std::path::Path;

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::exec::{fill_indexed, Execution};
use crate::{Result, TeigError, C64};

/// Vectors shorter than this are multiplied sequentially regardless of policy.
const PAR_MATVEC_MIN_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Compress triplets; duplicates are summed in input order, so equal
    /// triplet lists give bit-identical matrices.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= n_rows || c >= n_cols) {
            return Err(TeigError::DimensionMismatch(format!(
                "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
            )));
        }
        // stable: duplicates keep their accumulation order
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t).expect("indices in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of one row, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n_rows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        SparseMatrix::from_triplets(self.n_cols, self.n_rows, t).expect("indices in range")
    }

    pub fn scaled(&self, a: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        self.triplets().iter().map(|&(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    /// Assemble a block matrix. `blocks[r][c]` is an optional `(matrix, scale)`;
    /// row heights and column widths are given explicitly so empty block rows
    /// are allowed.
    pub fn from_blocks(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[Vec<Option<(&SparseMatrix, f64)>>],
    ) -> Result<SparseMatrix> {
        let row_off: Vec<usize> = offsets(row_sizes);
        let col_off: Vec<usize> = offsets(col_sizes);
        let mut t = Vec::new();
        for (br, row) in blocks.iter().enumerate() {
            for (bc, blk) in row.iter().enumerate() {
                if let Some((m, a)) = blk {
                    if m.n_rows != row_sizes[br] || m.n_cols != col_sizes[bc] {
                        return Err(TeigError::DimensionMismatch(format!(
                            "block ({br}, {bc}) is {}x{}, expected {}x{}",
                            m.n_rows, m.n_cols, row_sizes[br], col_sizes[bc]
                        )));
                    }
                    t.extend(m.triplets().into_iter().map(|(i, j, v)| (i + row_off[br], j + col_off[bc], a * v)));
                }
            }
        }
        SparseMatrix::from_triplets(row_off[row_sizes.len()], col_off[col_sizes.len()], t)
    }

    pub fn matvec<T>(&self, x: &[T]) -> Vec<T>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T> + Send + Sync,
    {
        self.matvec_with(Execution::Sequential, x)
    }

    pub fn matvec_with<T>(&self, exec: Execution, x: &[T]) -> Vec<T>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T> + Send + Sync,
    {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        let mut y = vec![T::zero(); self.n_rows];
        let exec = if self.n_rows < PAR_MATVEC_MIN_ROWS { Execution::Sequential } else { exec };
        fill_indexed(exec, &mut y, |i| {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc = acc + x[self.col_idx[k]] * self.values[k];
            }
            acc
        });
        y
    }

    /// Discrete sesquilinear form `y^H M x`.
    pub fn sesquilinear(&self, x: &[C64], y: &[C64]) -> C64 {
        let mx = self.matvec(x);
        y.iter().zip(&mx).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// MatrixMarket coordinate format, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::with_capacity(32 * self.nnz() + 64);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        s.push_str(&format!("{} {} {}\n", self.n_rows, self.n_cols, self.nnz()));
        for (i, j, v) in self.triplets() {
            s.push_str(&format!("{} {} {:.17e}\n", i + 1, j + 1, v));
        }
        s
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| TeigError::io(path, e))?;
        f.write_all(self.to_matrix_market().as_bytes()).map_err(|e| TeigError::io(path, e))
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut off = vec![0; sizes.len() + 1];
    for (i, s) in sizes.iter().enumerate() {
        off[i + 1] = off[i] + s;
    }
    off
}

/// Euclidean norm of a complex vector.
pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `y^H x`
pub fn dotc(y: &[C64], x: &[C64]) -> C64 {
    y.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
}
