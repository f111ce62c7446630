//! Compressed sparse row matrices and the small dense-vector helpers the
//! solvers need. Coefficient vectors are plain `Vec<f64>`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Value at (i, j), zero if the entry is not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n_rows {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Largest |A_ij - A_ji| over stored entries (0 for exactly symmetric).
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                defect = defect.max((v - self.get(j, i)).abs());
            }
        }
        defect
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut builder = CsrBuilder::new(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                builder.add(j, i, v);
            }
        }
        builder.finish()
    }

    /// Extract the submatrix with the given rows and columns (indices must
    /// be sorted). `col_map` maps a full column index to its position in
    /// `cols`, or `usize::MAX` if dropped.
    pub fn submatrix(&self, rows: &[usize], col_map: &[usize], n_sub_cols: usize) -> CsrMatrix {
        let mut builder = CsrBuilder::new(rows.len(), n_sub_cols);
        for (si, &i) in rows.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let sj = col_map[j];
                if sj != usize::MAX {
                    builder.add(si, sj, v);
                }
            }
        }
        builder.finish()
    }

    /// Write in MatrixMarket coordinate format (1-based, general).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }

    /// Structural validity: monotone row_ptr, sorted unique columns, finite
    /// values.
    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.n_rows + 1 || *self.row_ptr.last().unwrap() != self.nnz() {
            return Err(Error::invalid("csr: bad row_ptr"));
        }
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            if !cols.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::invalid(format!("csr: row {i} columns not sorted/unique")));
            }
            if cols.iter().any(|&j| j >= self.n_cols) {
                return Err(Error::invalid(format!("csr: row {i} column out of range")));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("csr: row {i} stores a non-finite value")));
            }
        }
        Ok(())
    }
}

/// Accumulates (row, col, value) triplets, summing duplicates, and emits a
/// sorted CSR matrix.
pub struct CsrBuilder {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        CsrBuilder {
            n_rows,
            n_cols,
            rows: vec![Vec::new(); n_rows],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.rows[i].push((j, v));
    }

    pub fn finish(self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// y += alpha x.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
