//! Minimal compressed sparse row storage built from coordinate triplets.

use alloc::vec::Vec;
use core::fmt;


/// Coordinate-format accumulator. Duplicates are summed on conversion, in
/// insertion order, so the result is deterministic.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut counts = alloc::vec![0usize; self.nrows + 1];
        for &(r, _, _) in &self.entries {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        // Bucket by row, keeping insertion order inside each row.
        let mut next = counts.clone();
        let mut bucket = alloc::vec![(0usize, 0.0f64); self.entries.len()];
        for &(r, c, v) in &self.entries {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..self.nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, row_ptr: alloc::vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Entry `(r, c)`, zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::with_capacity(self.ncols, self.nrows, self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push(c, r, v);
            }
        }
        t.to_csr()
    }

    /// `y += A^T x`
    pub fn matvec_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.mul_vec(x);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// `max |A_ij - A_ji|` over stored entries of either triangle.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Copy of the diagonal block `rows x cols` starting at `(r0, c0)`, dense,
    /// row-major.
    pub fn dense_block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; rows * cols];
        for i in 0..rows {
            for (c, v) in self.row(r0 + i) {
                if c >= c0 && c < c0 + cols {
                    out[i * cols + (c - c0)] = v;
                }
            }
        }
        out
    }

    /// Coordinate text dump: one `row col value` line per stored entry, with
    /// 17 significant digits.
    pub fn write_coordinate<W: fmt::Write>(&self, w: &mut W) -> fmt::Result {
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:.16e}", r, c, v)?;
            }
        }
        Ok(())
    }
}

/// Accumulator for matrices made of dense `row_block x col_block` blocks
/// whose block sparsity follows a cell adjacency. Storage is allocated up
/// front, so assembling never reallocates; explicit zeros are kept.
#[derive(Debug, Clone)]
pub struct BlockCsrBuilder {
    matrix: CsrMatrix,
    row_block: usize,
    col_block: usize,
    adjacency: Vec<Vec<usize>>,
}

impl BlockCsrBuilder {
    /// `adjacency[b]` lists the column blocks coupled to row block `b`; it is
    /// sorted and deduplicated here.
    pub fn new(row_block: usize, col_block: usize, num_col_blocks: usize, adjacency: Vec<Vec<usize>>) -> Self {
        let mut adjacency = adjacency;
        for a in &mut adjacency {
            a.sort_unstable();
            a.dedup();
        }
        let nrows = adjacency.len() * row_block;
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for adj in &adjacency {
            for _ in 0..row_block {
                for &cb in adj {
                    col_idx.extend(cb * col_block..(cb + 1) * col_block);
                }
                row_ptr.push(col_idx.len());
            }
        }
        let values = alloc::vec![0.0; col_idx.len()];
        let matrix = CsrMatrix { nrows, ncols: num_col_blocks * col_block, row_ptr, col_idx, values };
        BlockCsrBuilder { matrix, row_block, col_block, adjacency }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let rb = row / self.row_block;
        let cb = col / self.col_block;
        let pos = self.adjacency[rb]
            .iter()
            .position(|&b| b == cb)
            .expect("block outside the sparsity pattern");
        let idx = self.matrix.row_ptr[row] + pos * self.col_block + col % self.col_block;
        self.matrix.values[idx] += value;
    }

    pub fn finish(self) -> CsrMatrix {
        self.matrix
    }
}
