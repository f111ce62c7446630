//! Small dense matrices with LU solve. This is the fallback oracle the test
//! suites compare sparse results against; it is deliberately simple.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_csr(a: &CsrMatrix) -> Self {
        let mut d = DenseMatrix::zeros(a.n_rows, a.n_cols);
        for i in 0..a.n_rows {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| {
                (0..self.n_cols)
                    .map(|j| self[(i, j)] * x[j])
                    .sum()
            })
            .collect()
    }

    /// Solve A x = b by LU with partial pivoting.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.n_rows, self.n_cols);
        assert_eq!(b.len(), self.n_rows);
        let n = self.n_rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let mut pmax = k;
            let mut vmax = a[piv[k] * n + k].abs();
            for r in (k + 1)..n {
                let v = a[piv[r] * n + k].abs();
                if v > vmax {
                    vmax = v;
                    pmax = r;
                }
            }
            if vmax == 0.0 {
                return Err(Error::Factorization(format!("singular at column {k}")));
            }
            piv.swap(k, pmax);
            let pk = piv[k];
            for r in (k + 1)..n {
                let pr = piv[r];
                let factor = a[pr * n + k] / a[pk * n + k];
                a[pr * n + k] = factor;
                for c in (k + 1)..n {
                    a[pr * n + c] -= factor * a[pk * n + c];
                }
                x[pr] -= factor * x[pk];
            }
        }
        let mut out = vec![0.0; n];
        for k in (0..n).rev() {
            let pk = piv[k];
            let mut s = x[pk];
            for c in (k + 1)..n {
                s -= a[pk * n + c] * out[c];
            }
            out[k] = s / a[pk * n + k];
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}
