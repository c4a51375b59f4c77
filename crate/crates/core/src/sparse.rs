//! Compressed sparse row storage.

use std::io::Write;

use crate::error::{Error, Result};

/// Row-compressed matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` contributions before compression.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, other: TripletBuilder) {
        self.entries.extend(other.entries);
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.nrows, self.ncols, self.entries).expect("indices checked on push")
    }
}

impl SparseMatrix {
    /// Duplicates are summed after sorting by `(row, col, value)`, so the result does not
    /// depend on the order in which contributions were produced.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(Error::Dimension(format!("entry ({r}, {c}) outside a {nrows} x {ncols} matrix")));
        }
        if entries.iter().any(|e| !e.2.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix entry".into()));
        }
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, t).expect("dense input is in range")
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

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

    /// Iterates stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "vector length");
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `yᵀ A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        (0..self.nrows).map(|i| y[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> SparseMatrix {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, t).expect("transpose stays in range")
    }

    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c · other`
    pub fn add_scaled(&self, other: &SparseMatrix, c: f64) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension(format!(
                "{}x{} plus {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let t: Vec<_> = self.triplets().chain(other.triplets().map(|(i, j, v)| (i, j, c * v))).collect();
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        self.triplets().map(|(i, j, v)| (v - self.get(j, i)).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Writes `i j value` lines, zero based.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
