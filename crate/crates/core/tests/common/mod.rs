//! Dense, loop-based oracle assembly built directly from the weak forms.
//!
//! Independence from the code under test: basis functions are evaluated
//! through monomial coefficients obtained by inverting a Vandermonde matrix
//! at each element's Lagrange nodes (the library uses closed-form reference
//! shapes), and everything is accumulated into dense matrices. Polynomial
//! forms are integrated with a collapsed tensor-Gauss rule; the nonlinear
//! flow forms copy the 12-point degree-6 rule's constants verbatim, since
//! that rule is part of the discrete scheme's definition.

#![allow(dead_code)]

use splitfem::solver::DenseMatrix;
use splitfem::space::FeSpace;

/// Monomial exponents for quadratics: 1, x, y, x^2, xy, y^2.
const MONO: [(i32, i32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Per-element basis as monomial coefficient rows.
pub struct ElementBasis {
    /// coeffs[i][k]: coefficient of monomial k in local basis i.
    pub coeffs: Vec<[f64; 6]>,
}

impl ElementBasis {
    /// Build the Lagrange basis of the element from its node coordinates by
    /// Vandermonde inversion.
    pub fn new(node_coords: &[[f64; 2]]) -> Self {
        let n = node_coords.len();
        assert!(n == 3 || n == 6);
        let mut v = DenseMatrix::zeros(n, n);
        for (r, &[x, y]) in node_coords.iter().enumerate() {
            for (c, &(a, b)) in MONO.iter().take(n).enumerate() {
                v[(r, c)] = x.powi(a) * y.powi(b);
            }
        }
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            // Solve V c = e_i so that basis_i(x_j) = sum_k c_k m_k(x_j)
            // equals delta_ij.
            let c = v.lu_solve(&e).expect("element Vandermonde is nonsingular");
            let mut row = [0.0; 6];
            row[..n].copy_from_slice(&c);
            coeffs.push(row);
        }
        ElementBasis { coeffs }
    }

    pub fn eval(&self, i: usize, x: f64, y: f64) -> f64 {
        MONO.iter()
            .zip(self.coeffs[i].iter())
            .map(|(&(a, b), &c)| c * x.powi(a) * y.powi(b))
            .sum()
    }

    pub fn grad(&self, i: usize, x: f64, y: f64) -> [f64; 2] {
        let c = &self.coeffs[i];
        [
            c[1] + 2.0 * c[3] * x + c[4] * y,
            c[2] + c[4] * x + 2.0 * c[5] * y,
        ]
    }

    /// Second derivatives (xx, xy, yy) — constant for quadratics.
    pub fn hess(&self, i: usize) -> [f64; 3] {
        let c = &self.coeffs[i];
        [2.0 * c[3], c[4], 2.0 * c[5]]
    }
}

/// Collapsed tensor-Gauss points on a physical triangle: (x, y, weight).
pub fn duffy_points(v: [[f64; 2]; 3], n: usize) -> Vec<(f64, f64, f64)> {
    let (nodes, weights) = splitfem::quadrature::gauss_legendre_01(n);
    let area2 = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
        - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
        .abs();
    let mut out = Vec::with_capacity(n * n);
    for (i, &a) in nodes.iter().enumerate() {
        for (j, &b) in nodes.iter().enumerate() {
            let (r, s) = (a * (1.0 - b), b);
            let x = v[0][0] + r * (v[1][0] - v[0][0]) + s * (v[2][0] - v[0][0]);
            let y = v[0][1] + r * (v[1][1] - v[0][1]) + s * (v[2][1] - v[0][1]);
            out.push((x, y, weights[i] * weights[j] * (1.0 - b) * area2));
        }
    }
    out
}

/// Verbatim copy of the 12-point degree-6 symmetric rule (barycentric
/// orbits), mapped to physical points.
pub fn degree6_points(v: [[f64; 2]; 3]) -> Vec<(f64, f64, f64)> {
    let area2 = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
        - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
        .abs();
    let mut bary: Vec<([f64; 3], f64)> = Vec::new();
    for (a, w) in [
        (0.063089014491502, 0.050844906370207),
        (0.249286745170910, 0.116786275726379),
    ] {
        let b = 1.0 - 2.0 * a;
        bary.push(([b, a, a], w));
        bary.push(([a, b, a], w));
        bary.push(([a, a, b], w));
    }
    {
        let (a, b, w) = (0.310352451033785, 0.053145049844816, 0.082851075618374);
        let c = 1.0 - a - b;
        for p in [[c, a, b], [c, b, a], [a, c, b], [b, c, a], [a, b, c], [b, a, c]] {
            bary.push((p, w));
        }
    }
    bary.iter()
        .map(|&(l, w)| {
            (
                l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
                w * 0.5 * area2,
            )
        })
        .collect()
}

/// 3-point Gauss points along a segment: (x, y, arc weight).
pub fn edge_points(pa: [f64; 2], pb: [f64; 2]) -> Vec<(f64, f64, f64)> {
    let s = (0.6f64).sqrt();
    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
    [
        (0.5 * (1.0 - s), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + s), 5.0 / 18.0),
    ]
    .iter()
    .map(|&(t, w)| {
        (
            pa[0] + t * (pb[0] - pa[0]),
            pa[1] + t * (pb[1] - pa[1]),
            w * len,
        )
    })
    .collect()
}

fn element_nodes(space: &FeSpace, k: usize) -> Vec<[f64; 2]> {
    space
        .cell_nodes(k)
        .iter()
        .map(|&nd| space.dof_coords[nd])
        .collect()
}

/// Dense Gram matrix (phi_j, phi_i), component-expanded.
pub fn oracle_mass(space: &FeSpace) -> DenseMatrix {
    let comps = space.components;
    let n = space.n_dofs();
    let mut m = DenseMatrix::zeros(n, n);
    for k in 0..space.mesh.n_triangles() {
        let coords = element_nodes(space, k);
        let basis = ElementBasis::new(&coords);
        let nodes = space.cell_nodes(k);
        for (x, y, w) in duffy_points(space.mesh.triangle_vertices(k), 5) {
            for i in 0..nodes.len() {
                let pi = basis.eval(i, x, y);
                for j in 0..nodes.len() {
                    let pj = basis.eval(j, x, y);
                    for c in 0..comps {
                        m[(comps * nodes[i] + c, comps * nodes[j] + c)] += w * pi * pj;
                    }
                }
            }
        }
    }
    m
}

/// Dense (eps grad phi_j, grad phi_i) + (c phi_j, phi_i) at time t.
pub fn oracle_diffusion_reaction(
    space: &FeSpace,
    eps: impl Fn(f64, f64, f64) -> f64,
    c: impl Fn(f64, f64, f64) -> f64,
    t: f64,
) -> DenseMatrix {
    let n = space.n_dofs();
    let mut m = DenseMatrix::zeros(n, n);
    for k in 0..space.mesh.n_triangles() {
        let coords = element_nodes(space, k);
        let basis = ElementBasis::new(&coords);
        let nodes = space.cell_nodes(k);
        // Same rule family as the library for non-polynomial coefficients.
        let pts = if space.degree == 1 {
            // degree-4 6-point rule constants, copied.
            let v = space.mesh.triangle_vertices(k);
            let area2 = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
                - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
                .abs();
            let mut out = Vec::new();
            for (a, w) in [
                (0.445948490915965, 0.223381589678011),
                (0.091576213509771, 0.109951743655322),
            ] {
                let b = 1.0 - 2.0 * a;
                for l in [[b, a, a], [a, b, a], [a, a, b]] {
                    out.push((
                        l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                        l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
                        w * 0.5 * area2,
                    ));
                }
            }
            out
        } else {
            degree6_points(space.mesh.triangle_vertices(k))
        };
        for (x, y, w) in pts {
            let ev = eps(x, y, t);
            let cv = c(x, y, t);
            for i in 0..nodes.len() {
                let pi = basis.eval(i, x, y);
                let gi = basis.grad(i, x, y);
                for j in 0..nodes.len() {
                    let pj = basis.eval(j, x, y);
                    let gj = basis.grad(j, x, y);
                    m[(nodes[i], nodes[j])] +=
                        w * (ev * (gi[0] * gj[0] + gi[1] * gj[1]) + cv * pi * pj);
                }
            }
        }
    }
    m
}

/// Dense transport predictor right-hand side for the scalar scheme.
#[allow(clippy::too_many_arguments)]
pub fn oracle_cd_rhs(
    space: &FeSpace,
    u_prev: &[f64],
    b: impl Fn(f64, f64, f64) -> [f64; 2],
    div_b: impl Fn(f64, f64, f64) -> f64,
    f: Option<&dyn Fn(f64, f64, f64) -> f64>,
    t_lo: f64,
    dt: f64,
) -> Vec<f64> {
    let t_mid = t_lo + 0.5 * dt;
    let t_end = t_lo + dt;
    let mass = oracle_mass(space);
    let mut rhs = mass.mul_vec(u_prev);

    for k in 0..space.mesh.n_triangles() {
        let coords = element_nodes(space, k);
        let basis = ElementBasis::new(&coords);
        let nodes = space.cell_nodes(k);
        for (x, y, w) in duffy_points(space.mesh.triangle_vertices(k), 6) {
            let mut u = 0.0;
            let mut gu = [0.0; 2];
            for i in 0..nodes.len() {
                u += u_prev[nodes[i]] * basis.eval(i, x, y);
                let g = basis.grad(i, x, y);
                gu[0] += u_prev[nodes[i]] * g[0];
                gu[1] += u_prev[nodes[i]] * g[1];
            }
            let b_lo = b(x, y, t_lo);
            let b_mid = b(x, y, t_mid);
            let f_lo = f.map_or(0.0, |f| f(x, y, t_lo));
            let f_mid = f.map_or(0.0, |f| f(x, y, t_mid));
            let xi =
                u + 0.5 * dt * (f_lo - u * div_b(x, y, t_lo) - b_lo[0] * gu[0] - b_lo[1] * gu[1]);
            for i in 0..nodes.len() {
                let pi = basis.eval(i, x, y);
                let gi = basis.grad(i, x, y);
                rhs[nodes[i]] +=
                    dt * w * (f_mid * pi + xi * (b_mid[0] * gi[0] + b_mid[1] * gi[1]));
            }
        }
    }

    for e in &space.mesh.boundary_edges {
        let nrm = e.normal;
        let coords = element_nodes(space, e.triangle);
        let basis = ElementBasis::new(&coords);
        let nodes = space.cell_nodes(e.triangle);
        let pa = space.mesh.vertices[e.vertices[0]];
        let pb = space.mesh.vertices[e.vertices[1]];
        for (x, y, w) in edge_points(pa, pb) {
            let be = b(x, y, t_end);
            if be[0] * nrm[0] + be[1] * nrm[1] < 0.0 {
                continue;
            }
            let b_lo = b(x, y, t_lo);
            let b_mid = b(x, y, t_mid);
            let mut u = 0.0;
            let mut gu = [0.0; 2];
            for i in 0..nodes.len() {
                u += u_prev[nodes[i]] * basis.eval(i, x, y);
                let g = basis.grad(i, x, y);
                gu[0] += u_prev[nodes[i]] * g[0];
                gu[1] += u_prev[nodes[i]] * g[1];
            }
            let f_lo = f.map_or(0.0, |f| f(x, y, t_lo));
            let xi =
                u + 0.5 * dt * (f_lo - u * div_b(x, y, t_lo) - b_lo[0] * gu[0] - b_lo[1] * gu[1]);
            let bn = b_mid[0] * nrm[0] + b_mid[1] * nrm[1];
            for i in 0..nodes.len() {
                rhs[nodes[i]] -= dt * w * xi * bn * basis.eval(i, x, y);
            }
        }
    }
    rhs
}

/// Dense flow predictor right-hand side (vector-valued form).
pub fn oracle_ns_rhs(
    space: &FeSpace,
    u_prev: &[f64],
    u_b: impl Fn(f64, f64, f64) -> [f64; 2],
    t_lo: f64,
    dt: f64,
) -> Vec<f64> {
    assert_eq!(space.components, 2);
    let t_end = t_lo + dt;
    let mass = oracle_mass(space);
    let mut rhs = mass.mul_vec(u_prev);

    for k in 0..space.mesh.n_triangles() {
        let coords = element_nodes(space, k);
        let basis = ElementBasis::new(&coords);
        let nodes = space.cell_nodes(k);
        for (x, y, w) in degree6_points(space.mesh.triangle_vertices(k)) {
            let mut u = [0.0f64; 2];
            let mut gu = [[0.0f64; 2]; 2];
            let mut hu = [[0.0f64; 3]; 2];
            for i in 0..nodes.len() {
                let pi = basis.eval(i, x, y);
                let gi = basis.grad(i, x, y);
                let hi = basis.hess(i);
                for c in 0..2 {
                    let coef = u_prev[2 * nodes[i] + c];
                    u[c] += coef * pi;
                    gu[c][0] += coef * gi[0];
                    gu[c][1] += coef * gi[1];
                    hu[c][0] += coef * hi[0];
                    hu[c][1] += coef * hi[1];
                    hu[c][2] += coef * hi[2];
                }
            }
            let conv = [
                u[0] * gu[0][0] + u[1] * gu[0][1],
                u[0] * gu[1][0] + u[1] * gu[1][1],
            ];
            let div_conv = gu[0][0] * gu[0][0]
                + gu[1][1] * gu[1][1]
                + 2.0 * gu[0][1] * gu[1][0]
                + u[0] * (hu[0][0] + hu[1][1])
                + u[1] * (hu[0][1] + hu[1][2]);
            let eta = [u[0] - 0.5 * dt * conv[0], u[1] - 0.5 * dt * conv[1]];
            let div_eta = gu[0][0] + gu[1][1] - 0.5 * dt * div_conv;
            for i in 0..nodes.len() {
                let pi = basis.eval(i, x, y);
                let gi = basis.grad(i, x, y);
                let transport = div_eta * pi + eta[0] * gi[0] + eta[1] * gi[1];
                rhs[2 * nodes[i]] += dt * w * eta[0] * transport;
                rhs[2 * nodes[i] + 1] += dt * w * eta[1] * transport;
            }
        }
    }

    for e in &space.mesh.boundary_edges {
        let nrm = e.normal;
        let coords = element_nodes(space, e.triangle);
        let basis = ElementBasis::new(&coords);
        let nodes = space.cell_nodes(e.triangle);
        let pa = space.mesh.vertices[e.vertices[0]];
        let pb = space.mesh.vertices[e.vertices[1]];
        for (x, y, w) in edge_points(pa, pb) {
            let ub = u_b(x, y, t_end);
            if ub[0] * nrm[0] + ub[1] * nrm[1] < 0.0 {
                continue;
            }
            let mut u = [0.0f64; 2];
            let mut gu = [[0.0f64; 2]; 2];
            for i in 0..nodes.len() {
                let pi = basis.eval(i, x, y);
                let gi = basis.grad(i, x, y);
                for c in 0..2 {
                    let coef = u_prev[2 * nodes[i] + c];
                    u[c] += coef * pi;
                    gu[c][0] += coef * gi[0];
                    gu[c][1] += coef * gi[1];
                }
            }
            let conv = [
                u[0] * gu[0][0] + u[1] * gu[0][1],
                u[0] * gu[1][0] + u[1] * gu[1][1],
            ];
            let eta = [u[0] - 0.5 * dt * conv[0], u[1] - 0.5 * dt * conv[1]];
            let eta_n = eta[0] * nrm[0] + eta[1] * nrm[1];
            for i in 0..nodes.len() {
                let pi = basis.eval(i, x, y);
                rhs[2 * nodes[i]] -= dt * w * eta_n * eta[0] * pi;
                rhs[2 * nodes[i] + 1] -= dt * w * eta_n * eta[1] * pi;
            }
        }
    }
    rhs
}

/// Dense Stokes blocks: velocity block dt^-1 M + Re^-1 K, divergence
/// coupling (div phi_j, psi_q), and the pressure-mean row.
pub fn oracle_stokes_blocks(
    vel_space: &FeSpace,
    pres_space: &FeSpace,
    dt: f64,
    re: f64,
) -> (DenseMatrix, DenseMatrix, Vec<f64>) {
    let n_vel = vel_space.n_dofs();
    let n_pres = pres_space.n_dofs();
    let mut a = DenseMatrix::zeros(n_vel, n_vel);
    let mut b = DenseMatrix::zeros(n_pres, n_vel);
    let mut mean = vec![0.0; n_pres];
    for k in 0..vel_space.mesh.n_triangles() {
        let vcoords = element_nodes(vel_space, k);
        let vbasis = ElementBasis::new(&vcoords);
        let pcoords = element_nodes(pres_space, k);
        let pbasis = ElementBasis::new(&pcoords);
        let vnodes = vel_space.cell_nodes(k);
        let pnodes = pres_space.cell_nodes(k);
        for (x, y, w) in degree6_points(vel_space.mesh.triangle_vertices(k)) {
            for i in 0..6 {
                let pi = vbasis.eval(i, x, y);
                let gi = vbasis.grad(i, x, y);
                for j in 0..6 {
                    let pj = vbasis.eval(j, x, y);
                    let gj = vbasis.grad(j, x, y);
                    let val = w * (pi * pj / dt + (gi[0] * gj[0] + gi[1] * gj[1]) / re);
                    for c in 0..2 {
                        a[(2 * vnodes[i] + c, 2 * vnodes[j] + c)] += val;
                    }
                }
            }
            for q in 0..3 {
                let pq = pbasis.eval(q, x, y);
                for j in 0..6 {
                    let gj = vbasis.grad(j, x, y);
                    b[(pnodes[q], 2 * vnodes[j])] += w * pq * gj[0];
                    b[(pnodes[q], 2 * vnodes[j] + 1)] += w * pq * gj[1];
                }
                mean[pnodes[q]] += w * pq;
            }
        }
    }
    (a, b, mean)
}

/// L2 error against an exact function with a much finer quadrature than the
/// library's norm rule.
pub fn oracle_l2_error(
    space: &FeSpace,
    field: &[f64],
    exact: impl Fn(f64, f64, f64) -> f64,
    t: f64,
) -> f64 {
    let mut total = 0.0;
    for k in 0..space.mesh.n_triangles() {
        let coords = element_nodes(space, k);
        let basis = ElementBasis::new(&coords);
        let nodes = space.cell_nodes(k);
        for (x, y, w) in duffy_points(space.mesh.triangle_vertices(k), 12) {
            let mut uh = 0.0;
            for i in 0..nodes.len() {
                uh += field[nodes[i]] * basis.eval(i, x, y);
            }
            let d = uh - exact(x, y, t);
            total += w * d * d;
        }
    }
    total.sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn dense_max_diff(a: &DenseMatrix, b: &splitfem::sparse::CsrMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.n_rows {
        for j in 0..a.n_cols {
            worst = worst.max((a[(i, j)] - b.get(i, j)).abs());
        }
    }
    worst
}
