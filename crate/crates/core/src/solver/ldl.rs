//! Sparse LDL^T factorization for the symmetric indefinite saddle-point
//! system, with a coordinate nested-dissection ordering, sign-aware static
//! pivot regularization and iterative refinement. The factorization is
//! built once and reused across all time steps.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

/// Fill-reducing ordering by recursive coordinate bisection with graph
/// vertex separators. Returns `perm` mapping new index -> old index.
pub fn nested_dissection(adj: &CsrMatrix, coords: &[[f64; 2]]) -> Vec<usize> {
    let n = adj.n_rows;
    assert_eq!(coords.len(), n);
    let mut perm = Vec::with_capacity(n);
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut in_left = vec![false; n];
    dissect(adj, coords, &mut nodes, &mut perm, &mut in_left);
    debug_assert_eq!(perm.len(), n);
    perm
}

fn dissect(
    adj: &CsrMatrix,
    coords: &[[f64; 2]],
    nodes: &mut [usize],
    out: &mut Vec<usize>,
    in_left: &mut [bool],
) {
    const LEAF: usize = 48;
    if nodes.len() <= LEAF {
        out.extend_from_slice(nodes);
        return;
    }
    // Split along the wider coordinate extent at the median.
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for &v in nodes.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[v][d]);
            hi[d] = hi[d].max(coords[v][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    nodes.sort_unstable_by(|&a, &b| {
        coords[a][axis]
            .partial_cmp(&coords[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mid = nodes.len() / 2;
    let mut left: Vec<usize> = nodes[..mid].to_vec();
    let right_all = &nodes[mid..];

    for &v in &left {
        in_left[v] = true;
    }
    // Separator: right-half nodes adjacent to the left half.
    let mut right = Vec::with_capacity(right_all.len());
    let mut sep = Vec::new();
    for &v in right_all {
        let (cols, _) = adj.row(v);
        if cols.iter().any(|&u| in_left[u]) {
            sep.push(v);
        } else {
            right.push(v);
        }
    }
    for &v in &left {
        in_left[v] = false;
    }

    // An empty separator just means the halves are already disconnected.
    dissect(adj, coords, &mut left, out, in_left);
    dissect(adj, coords, &mut right, out, in_left);
    out.extend_from_slice(&sep);
}

/// Reusable LDL^T factorization of a sparse symmetric matrix.
pub struct LdlFactorization {
    matrix: Arc<CsrMatrix>,
    /// new -> old
    perm: Vec<usize>,
    /// old -> new
    inv_perm: Vec<usize>,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    diag: Vec<f64>,
    /// Number of pivots replaced by the static regularization.
    pub regularized_pivots: usize,
    /// Relative residual target for the refined solve.
    pub refine_tol: f64,
}

impl LdlFactorization {
    /// Factor `matrix` (full symmetric storage). `coords` drive the
    /// ordering; `pivot_signs` give the expected inertia (+1/-1) per row
    /// for static regularization of near-zero pivots. Rows with sign 0 are
    /// pinned to the end of the ordering (dense border rows).
    pub fn new(
        matrix: Arc<CsrMatrix>,
        coords: &[[f64; 2]],
        pivot_signs: &[i8],
        pinned_last: &[usize],
    ) -> Result<Self> {
        let n = matrix.n_rows;
        if matrix.n_cols != n {
            return Err(Error::Factorization("matrix is not square".into()));
        }

        let mut perm = nested_dissection(&matrix, coords);
        // Pin border rows (e.g. the pressure-mean multiplier) to the end.
        if !pinned_last.is_empty() {
            let pin: Vec<usize> = pinned_last.to_vec();
            perm.retain(|v| !pin.contains(v));
            perm.extend_from_slice(&pin);
        }
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        // Permuted lower-triangular pattern (row k holds columns <= k).
        let mut low_ptr = vec![0usize; n + 1];
        let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for new_i in 0..n {
            let (cols, vals) = matrix.row(perm[new_i]);
            for (&j, &v) in cols.iter().zip(vals) {
                let new_j = inv_perm[j];
                if new_j <= new_i {
                    entries[new_i].push((new_j, v));
                }
            }
            entries[new_i].sort_unstable_by_key(|&(j, _)| j);
        }
        for i in 0..n {
            low_ptr[i + 1] = low_ptr[i] + entries[i].len();
        }

        // Symbolic pass: elimination tree and column counts.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut l_nz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(j, _) in &entries[k] {
                if j >= k {
                    continue;
                }
                let mut i = j;
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    l_nz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut l_colptr = vec![0usize; n + 1];
        for i in 0..n {
            l_colptr[i + 1] = l_colptr[i] + l_nz[i];
        }
        let nnz_l = l_colptr[n];
        let mut l_rowidx = vec![0usize; nnz_l];
        let mut l_values = vec![0.0f64; nnz_l];
        let mut diag = vec![0.0f64; n];

        // Pivot threshold relative to the matrix magnitude.
        let max_abs = matrix.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let tau = 1e-13 * max_abs.max(1e-300);
        let mut regularized = 0usize;

        // Numeric pass (up-looking, one row of L per step).
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut l_next = vec![0usize; n]; // next free slot per column
        l_next.copy_from_slice(&l_colptr[..n]);
        let mut flag_n = vec![usize::MAX; n];
        for k in 0..n {
            let mut top = n;
            flag_n[k] = k;
            y[k] = 0.0;
            for &(j, v) in &entries[k] {
                y[j] += v;
                let mut len = 0usize;
                let mut i = j;
                while flag_n[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag_n[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = l_next[i];
                for p in l_colptr[i]..p2 {
                    y[l_rowidx[p]] -= l_values[p] * yi;
                }
                let l_ki = yi / diag[i];
                dk -= l_ki * yi;
                l_rowidx[p2] = k;
                l_values[p2] = l_ki;
                l_next[i] += 1;
            }
            if dk.abs() < tau {
                // Static regularization with the expected inertia sign.
                let sign = pivot_signs.get(perm[k]).copied().unwrap_or(1);
                dk = if sign < 0 { -tau } else { tau };
                regularized += 1;
            }
            diag[k] = dk;
        }

        Ok(LdlFactorization {
            matrix,
            perm,
            inv_perm,
            l_colptr,
            l_rowidx,
            l_values,
            diag,
            regularized_pivots: regularized,
            refine_tol: 1e-13,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn nnz_factor(&self) -> usize {
        self.l_values.len()
    }

    /// Solve P^T (L D L^T) P x = b without refinement.
    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        // L y = b
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for p in self.l_colptr[i]..self.l_colptr[i + 1] {
                    x[self.l_rowidx[p]] -= self.l_values[p] * xi;
                }
            }
        }
        // D z = y
        for i in 0..n {
            x[i] /= self.diag[i];
        }
        // L^T w = z
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.l_colptr[i]..self.l_colptr[i + 1] {
                s -= self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[i] = s;
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[self.perm[k]] = x[k];
        }
        out
    }

    /// Solve with iterative refinement against the stored matrix. The
    /// computation is deterministic: the same handle and right-hand side
    /// always produce bitwise-identical solutions.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        assert_eq!(rhs.len(), n);
        let rhs_norm = norm2(rhs);
        if rhs_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.solve_raw(rhs);
        let mut best_res = f64::MAX;
        for _ in 0..8 {
            let ax = self.matrix.mul_vec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let res = norm2(&r) / rhs_norm;
            if res <= self.refine_tol {
                return Ok(x);
            }
            if res >= best_res * 0.5 {
                // Stagnation: accept if adequate, else fail below.
                if res <= 1e-8 {
                    return Ok(x);
                }
            }
            best_res = best_res.min(res);
            let dx = self.solve_raw(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        let ax = self.matrix.mul_vec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let res = norm2(&r) / rhs_norm;
        if res <= 1e-8 {
            Ok(x)
        } else {
            Err(Error::Factorization(format!(
                "refined solve stalled at relative residual {res:.3e}"
            )))
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Permutation used by the factorization (new -> old).
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse_permutation(&self) -> &[usize] {
        &self.inv_perm
    }
}
