//! Sparse zero-fill incomplete Cholesky, used to precondition the
//! diffusion-correction solves.

use crate::error::{Error, Result};
use crate::sparse::{CsrBuilder, CsrMatrix};

/// IC(0) factor L (lower triangular, same pattern as the lower triangle of
/// A) together with its transpose for the backward sweep.
pub struct Ic0 {
    l: CsrMatrix,
    lt: CsrMatrix,
}

impl Ic0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        // A breakdown (non-positive pivot on the incomplete pattern) is
        // retried with a progressively stronger diagonal shift.
        let mut shift = 0.0;
        let max_diag = a
            .diagonal()
            .iter()
            .fold(0.0f64, |m, &d| m.max(d.abs()));
        for _ in 0..32 {
            match Self::try_factor(a, shift) {
                Ok(ic) => return Ok(ic),
                Err(_) => {
                    shift = if shift == 0.0 {
                        1e-8 * max_diag.max(1e-300)
                    } else {
                        shift * 10.0
                    };
                }
            }
        }
        Err(Error::MatrixProperty(
            "incomplete Cholesky broke down even with diagonal shifts".into(),
        ))
    }

    fn try_factor(a: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.n_rows;
        // Lower-triangular pattern of A, values overwritten in place.
        let mut b = CsrBuilder::new(n, n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j < i {
                    b.add(i, j, v);
                } else if j == i {
                    b.add(i, j, v + shift);
                }
            }
        }
        let mut l = b.finish();

        for i in 0..n {
            let (row_lo, row_hi) = (l.row_ptr[i], l.row_ptr[i + 1]);
            for idx in row_lo..row_hi {
                let j = l.col_idx[idx];
                // Dot of rows i and j over columns < j (merge of sorted
                // patterns).
                let mut s = l.values[idx];
                {
                    let (jlo, jhi) = (l.row_ptr[j], l.row_ptr[j + 1]);
                    let mut pi = row_lo;
                    let mut pj = jlo;
                    while pi < idx && pj < jhi {
                        let ci = l.col_idx[pi];
                        let cj = l.col_idx[pj];
                        if cj >= j {
                            break;
                        }
                        match ci.cmp(&cj) {
                            std::cmp::Ordering::Less => pi += 1,
                            std::cmp::Ordering::Greater => pj += 1,
                            std::cmp::Ordering::Equal => {
                                s -= l.values[pi] * l.values[pj];
                                pi += 1;
                                pj += 1;
                            }
                        }
                    }
                }
                if j < i {
                    let djj = l.get(j, j);
                    l.values[idx] = s / djj;
                } else {
                    if s <= 0.0 {
                        return Err(Error::MatrixProperty(format!(
                            "IC(0) pivot {s:.3e} at row {i}"
                        )));
                    }
                    l.values[idx] = s.sqrt();
                }
            }
        }

        let lt = l.transpose();
        Ok(Ic0 { l, lt })
    }

    /// z = (L L^T)^{-1} r.
    pub fn apply(&self, r: &[f64], z: &mut Vec<f64>) {
        let n = self.l.n_rows;
        z.clear();
        z.resize(n, 0.0);
        // Forward: L y = r (y stored in z).
        for i in 0..n {
            let (cols, vals) = self.l.row(i);
            let m = cols.len();
            debug_assert_eq!(cols[m - 1], i, "row {i} is missing its diagonal");
            let mut s = r[i];
            for k in 0..m - 1 {
                s -= vals[k] * z[cols[k]];
            }
            z[i] = s / vals[m - 1];
        }
        // Backward: L^T z = y. Rows of lt are the columns of L.
        for i in (0..n).rev() {
            let (cols, vals) = self.lt.row(i);
            let mut s = z[i];
            for k in 1..cols.len() {
                s -= vals[k] * z[cols[k]];
            }
            z[i] = s / vals[0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrBuilder;

    #[test]
    fn exact_on_tridiagonal_spd() {
        // IC(0) of a tridiagonal SPD matrix equals the exact Cholesky, so
        // the preconditioner application is an exact solve.
        let n = 8;
        let mut b = CsrBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 4.0);
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
                b.add(i + 1, i, -1.0);
            }
        }
        let a = b.finish();
        let ic = Ic0::new(&a).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let rhs = a.mul_vec(&x_true);
        let mut z = Vec::new();
        ic.apply(&rhs, &mut z);
        for (zi, xi) in z.iter().zip(&x_true) {
            assert!((zi - xi).abs() < 1e-12);
        }
    }
}
