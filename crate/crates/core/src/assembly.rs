//! Element-wise assembly of every bilinear and linear form the schemes use:
//! mass (consistent and row-sum lumped), diffusion-reaction, the explicit
//! convection right-hand sides with their inflow-complement boundary
//! integrals, and the generalized Stokes block system with a zero-mean
//! pressure multiplier.
//!
//! Linear-element forms use the degree-4 rule, quadratic and Taylor-Hood
//! forms the degree-6 rule; boundary line integrals use 3-point Gauss per
//! edge with a per-point inflow sign test so edges of mixed sign split
//! correctly. Assembly is single-threaded and deterministic.

use crate::error::{Error, Result};
use crate::mesh::BoundaryEdge;
use crate::quadrature::{edge_gauss3, triangle_degree4, triangle_degree6, QuadratureRule};
use crate::space::{FeSpace, InflowSet};
use crate::sparse::{CsrBuilder, CsrMatrix};

pub type ScalarFn<'a> = &'a dyn Fn(f64, f64, f64) -> f64;
pub type VectorFn<'a> = &'a dyn Fn(f64, f64, f64) -> [f64; 2];

/// Pick the volume rule matching a space's polynomial degree.
pub fn volume_rule(space: &FeSpace) -> QuadratureRule {
    if space.degree == 1 {
        triangle_degree4()
    } else {
        triangle_degree6()
    }
}

/// Reference shape data tabulated at the quadrature points of a rule.
struct ShapeTable {
    /// (shape values, reference gradients) per quadrature point.
    at: Vec<([f64; 6], [[f64; 2]; 6])>,
    n_local: usize,
}

impl ShapeTable {
    fn new(space: &FeSpace, rule: &QuadratureRule) -> Self {
        let mut at = Vec::with_capacity(rule.len());
        let mut n_local = 0;
        for &l in &rule.points {
            let (s, nl) = space.shape(l);
            let g = if space.degree == 1 {
                let gr = crate::space::grad_p1_ref();
                [gr[0], gr[1], gr[2], [0.0; 2], [0.0; 2], [0.0; 2]]
            } else {
                crate::space::grad_p2_ref(l)
            };
            n_local = nl;
            at.push((s, g));
        }
        ShapeTable { at, n_local }
    }
}

/// Physical coordinates of a barycentric point in triangle k.
#[inline]
fn physical_point(space: &FeSpace, k: usize, l: [f64; 3]) -> [f64; 2] {
    let v = space.mesh.triangle_vertices(k);
    [
        l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
        l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
    ]
}

/// Consistent Gram matrix, or its row-sum lumped diagonal when `lumped`.
pub fn mass_matrix(space: &FeSpace, lumped: bool) -> CsrMatrix {
    let rule = volume_rule(space);
    let table = ShapeTable::new(space, &rule);
    let comps = space.components;
    let n = space.n_dofs();
    let mut builder = CsrBuilder::new(n, n);
    let mut local = [[0.0f64; 6]; 6];
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let scale = 2.0 * space.geom(k).area;
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        for (q, (s, _)) in table.at.iter().enumerate() {
            let w = scale * rule.weights[q];
            for i in 0..table.n_local {
                let wi = w * s[i];
                for j in 0..table.n_local {
                    local[i][j] += wi * s[j];
                }
            }
        }
        for i in 0..table.n_local {
            for j in 0..table.n_local {
                let v = local[i][j];
                for c in 0..comps {
                    let (gi, gj) = (nodes[i] * comps + c, nodes[j] * comps + c);
                    if lumped {
                        builder.add(gi, gi, v);
                    } else {
                        builder.add(gi, gj, v);
                    }
                }
            }
        }
    }
    builder.finish()
}

/// Row sums of a consistent mass matrix (the lumped diagonal).
pub fn lump_rows(mass: &CsrMatrix) -> Vec<f64> {
    mass.row_sums()
}

/// Either a consistent Gram matrix or its lumped diagonal, applied as an
/// operator.
pub enum MassOp<'a> {
    Consistent(&'a CsrMatrix),
    Lumped(&'a [f64]),
}

impl MassOp<'_> {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MassOp::Consistent(m) => m.mul_vec(x),
            MassOp::Lumped(d) => d.iter().zip(x).map(|(di, xi)| di * xi).collect(),
        }
    }
}

/// Matrix of (eps grad u, grad v) + (c u, v) with coefficients evaluated at
/// quadrature points at time `t`. Scalar spaces only.
pub fn diffusion_reaction_matrix(
    space: &FeSpace,
    eps: ScalarFn,
    c: ScalarFn,
    t: f64,
) -> Result<CsrMatrix> {
    assert_eq!(space.components, 1, "diffusion_reaction_matrix expects a scalar space");
    let rule = volume_rule(space);
    let table = ShapeTable::new(space, &rule);
    let n = space.n_dofs();
    let mut builder = CsrBuilder::new(n, n);
    let mut grads = [[0.0f64; 2]; 6];
    let mut local = [[0.0f64; 6]; 6];
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let geom = space.geom(k);
        let scale = 2.0 * geom.area;
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        for (q, (s, g_ref)) in table.at.iter().enumerate() {
            let [x, y] = physical_point(space, k, rule.points[q]);
            let eps_q = eps(x, y, t);
            if eps_q < 0.0 {
                return Err(Error::CoefficientSign {
                    what: "diffusion coefficient",
                    value: eps_q,
                    x,
                    y,
                });
            }
            let c_q = c(x, y, t);
            let w = scale * rule.weights[q];
            for i in 0..table.n_local {
                grads[i] = geom.grad(g_ref[i]);
            }
            for i in 0..table.n_local {
                for j in 0..table.n_local {
                    local[i][j] += w
                        * (eps_q * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1])
                            + c_q * s[i] * s[j]);
                }
            }
        }
        for i in 0..table.n_local {
            for j in 0..table.n_local {
                builder.add(nodes[i], nodes[j], local[i][j]);
            }
        }
    }
    Ok(builder.finish())
}

/// Diffusion-correction system M + dt * (diffusion + reaction at `t`).
pub fn cd_diffusion_system(
    space: &FeSpace,
    dt: f64,
    eps: ScalarFn,
    c: ScalarFn,
    t: f64,
) -> Result<CsrMatrix> {
    assert!(dt > 0.0);
    let mass = mass_matrix(space, false);
    let dr = diffusion_reaction_matrix(space, eps, c, t)?;
    let mut builder = CsrBuilder::new(mass.n_rows, mass.n_cols);
    for i in 0..mass.n_rows {
        let (cols, vals) = mass.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            builder.add(i, j, v);
        }
        let (cols, vals) = dr.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            builder.add(i, j, dt * v);
        }
    }
    Ok(builder.finish())
}

/// Load vector (g(., t), phi_i) by full element quadrature.
pub fn load_vector(space: &FeSpace, g: ScalarFn, t: f64) -> Vec<f64> {
    assert_eq!(space.components, 1);
    let rule = volume_rule(space);
    let table = ShapeTable::new(space, &rule);
    let mut out = vec![0.0; space.n_dofs()];
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let scale = 2.0 * space.geom(k).area;
        for (q, (s, _)) in table.at.iter().enumerate() {
            let [x, y] = physical_point(space, k, rule.points[q]);
            let gv = scale * rule.weights[q] * g(x, y, t);
            for i in 0..table.n_local {
                out[nodes[i]] += gv * s[i];
            }
        }
    }
    out
}

/// Vector load (g(., t), v) for two-component spaces.
pub fn load_vector_vector(space: &FeSpace, g: VectorFn, t: f64) -> Vec<f64> {
    assert_eq!(space.components, 2);
    let rule = volume_rule(space);
    let table = ShapeTable::new(space, &rule);
    let mut out = vec![0.0; space.n_dofs()];
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let scale = 2.0 * space.geom(k).area;
        for (q, (s, _)) in table.at.iter().enumerate() {
            let [x, y] = physical_point(space, k, rule.points[q]);
            let gv = g(x, y, t);
            let w = scale * rule.weights[q];
            for i in 0..table.n_local {
                out[2 * nodes[i]] += w * gv[0] * s[i];
                out[2 * nodes[i] + 1] += w * gv[1] * s[i];
            }
        }
    }
    out
}

/// Gauss points along a boundary edge: (physical point, barycentric point
/// in the adjacent triangle, arc weight).
fn edge_quad_points(space: &FeSpace, e: &BoundaryEdge) -> [([f64; 2], [f64; 3], f64); 3] {
    let pa = space.mesh.vertices[e.vertices[0]];
    let pb = space.mesh.vertices[e.vertices[1]];
    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
    edge_gauss3().map(|(s, w)| {
        let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
        let l = space.barycentric(e.triangle, x[0], x[1]);
        (x, l, w * len)
    })
}

/// Explicit convection right-hand side for the scalar transport substep:
///
///   (u_prev, v) + dt (f^mid, v) + dt (xi, b^mid . grad v)
///                - dt < xi, v b^mid . n >_{Gamma \ Gamma^-}
///
/// with the half-step predictor
/// xi = u_prev + (dt/2) (f^lo - u_prev div b^lo - b^lo . grad u_prev)
/// evaluated pointwise from the element-local polynomial, and the boundary
/// sign test taken with b at the substep end time (the same time level that
/// defines `inflow`). Rows of inflow DOFs are assembled too; the caller
/// overwrites them with Dirichlet values.
#[allow(clippy::too_many_arguments)]
pub fn cd_convection_rhs(
    space: &FeSpace,
    mass: &MassOp,
    u_prev: &[f64],
    b: VectorFn,
    div_b: ScalarFn,
    f: Option<ScalarFn>,
    t_lo: f64,
    dt: f64,
    inflow: &InflowSet,
) -> Result<Vec<f64>> {
    assert_eq!(space.components, 1, "cd_convection_rhs expects a scalar space");
    assert!(dt > 0.0);
    let t_mid = t_lo + 0.5 * dt;
    let t_end = t_lo + dt;
    if (inflow.time - t_end).abs() > 1e-12 * t_end.abs().max(1.0) {
        return Err(Error::invalid(format!(
            "inflow set was built at t={} but the substep ends at t={}",
            inflow.time, t_end
        )));
    }

    let mut rhs = mass.apply(u_prev);

    let rule = volume_rule(space);
    let table = ShapeTable::new(space, &rule);
    let mut grads = [[0.0f64; 2]; 6];
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let geom = space.geom(k);
        let scale = 2.0 * geom.area;
        for (q, (s, g_ref)) in table.at.iter().enumerate() {
            let [x, y] = physical_point(space, k, rule.points[q]);
            for i in 0..table.n_local {
                grads[i] = geom.grad(g_ref[i]);
            }
            let mut u = 0.0;
            let mut grad_u = [0.0f64; 2];
            for i in 0..table.n_local {
                let c = u_prev[nodes[i]];
                u += c * s[i];
                grad_u[0] += c * grads[i][0];
                grad_u[1] += c * grads[i][1];
            }
            let b_lo = b(x, y, t_lo);
            let b_mid = b(x, y, t_mid);
            let f_lo = f.map_or(0.0, |f| f(x, y, t_lo));
            let f_mid = f.map_or(0.0, |f| f(x, y, t_mid));
            let xi = u
                + 0.5 * dt * (f_lo - u * div_b(x, y, t_lo) - b_lo[0] * grad_u[0] - b_lo[1] * grad_u[1]);
            let w = scale * rule.weights[q] * dt;
            for i in 0..table.n_local {
                rhs[nodes[i]] +=
                    w * (f_mid * s[i] + xi * (b_mid[0] * grads[i][0] + b_mid[1] * grads[i][1]));
            }
        }
    }

    // Boundary integral over the complement of the inflow boundary, with
    // one-sided traces of u_prev from the unique adjacent element.
    let mut grads_b = [[0.0f64; 2]; 6];
    for e in &space.mesh.boundary_edges {
        let nrm = e.normal;
        let nodes = space.cell_nodes(e.triangle);
        let geom = space.geom(e.triangle);
        for (xq, l, w) in edge_quad_points(space, e) {
            let [x, y] = xq;
            let b_end = b(x, y, t_end);
            if b_end[0] * nrm[0] + b_end[1] * nrm[1] < 0.0 {
                continue; // inflow point
            }
            let b_lo = b(x, y, t_lo);
            let b_mid = b(x, y, t_mid);
            let (s, nl) = space.shape(l);
            let g_ref = if space.degree == 1 {
                let gr = crate::space::grad_p1_ref();
                [gr[0], gr[1], gr[2], [0.0; 2], [0.0; 2], [0.0; 2]]
            } else {
                crate::space::grad_p2_ref(l)
            };
            for i in 0..nl {
                grads_b[i] = geom.grad(g_ref[i]);
            }
            let mut u = 0.0;
            let mut grad_u = [0.0f64; 2];
            for i in 0..nl {
                let c = u_prev[nodes[i]];
                u += c * s[i];
                grad_u[0] += c * grads_b[i][0];
                grad_u[1] += c * grads_b[i][1];
            }
            let f_lo = f.map_or(0.0, |f| f(x, y, t_lo));
            let xi = u
                + 0.5 * dt * (f_lo - u * div_b(x, y, t_lo) - b_lo[0] * grad_u[0] - b_lo[1] * grad_u[1]);
            let bn = b_mid[0] * nrm[0] + b_mid[1] * nrm[1];
            let factor = dt * w * xi * bn;
            for i in 0..nl {
                rhs[nodes[i]] -= factor * s[i];
            }
        }
    }

    Ok(rhs)
}

/// Explicit convection right-hand side for the Navier-Stokes substep:
///
///   (u_prev, v) + dt (eta, (div eta + eta . grad) v)
///               - dt < eta, (eta . n) v >_{Gamma \ Gamma^-}
///
/// with eta = u_prev - (dt/2) (u_prev . grad) u_prev, both eta and its
/// exact element-local divergence evaluated from the quadratic polynomial
/// of u_prev. The inflow region is defined by the boundary velocity datum
/// at the substep end time.
pub fn ns_convection_rhs(
    space: &FeSpace,
    mass: &CsrMatrix,
    u_prev: &[f64],
    u_b: VectorFn,
    t_lo: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    if space.components != 2 || space.degree != 2 {
        return Err(Error::invalid(
            "ns_convection_rhs expects a quadratic two-component space",
        ));
    }
    assert!(dt > 0.0);
    let t_end = t_lo + dt;

    let mut rhs = mass.mul_vec(u_prev);

    let rule = volume_rule(space);
    let table = ShapeTable::new(space, &rule);
    let hess_ref = crate::space::hess_p2_ref();
    let mut grads = [[0.0f64; 2]; 6];
    for k in 0..space.mesh.n_triangles() {
        let nodes = space.cell_nodes(k);
        let geom = space.geom(k);
        let scale = 2.0 * geom.area;

        // Physical Hessians are constant on the element for quadratics;
        // accumulate the Hessian of each velocity component once.
        let mut hess_u = [[0.0f64; 3]; 2];
        for i in 0..6 {
            let h = geom.hess(hess_ref[i]);
            for c in 0..2 {
                let coef = u_prev[2 * nodes[i] + c];
                hess_u[c][0] += coef * h[0];
                hess_u[c][1] += coef * h[1];
                hess_u[c][2] += coef * h[2];
            }
        }

        for (q, (s, g_ref)) in table.at.iter().enumerate() {
            for i in 0..6 {
                grads[i] = geom.grad(g_ref[i]);
            }
            let mut u = [0.0f64; 2];
            let mut grad_u = [[0.0f64; 2]; 2]; // grad_u[c][d] = d u_c / d x_d
            for i in 0..6 {
                for c in 0..2 {
                    let coef = u_prev[2 * nodes[i] + c];
                    u[c] += coef * s[i];
                    grad_u[c][0] += coef * grads[i][0];
                    grad_u[c][1] += coef * grads[i][1];
                }
            }
            // Convective derivative and its divergence.
            let conv = [
                u[0] * grad_u[0][0] + u[1] * grad_u[0][1],
                u[0] * grad_u[1][0] + u[1] * grad_u[1][1],
            ];
            let div_conv = grad_u[0][0] * grad_u[0][0]
                + grad_u[1][1] * grad_u[1][1]
                + 2.0 * grad_u[0][1] * grad_u[1][0]
                + u[0] * (hess_u[0][0] + hess_u[1][1])
                + u[1] * (hess_u[0][1] + hess_u[1][2]);
            let eta = [u[0] - 0.5 * dt * conv[0], u[1] - 0.5 * dt * conv[1]];
            let div_eta = grad_u[0][0] + grad_u[1][1] - 0.5 * dt * div_conv;

            let w = scale * rule.weights[q] * dt;
            for i in 0..6 {
                let transport = div_eta * s[i] + eta[0] * grads[i][0] + eta[1] * grads[i][1];
                rhs[2 * nodes[i]] += w * eta[0] * transport;
                rhs[2 * nodes[i] + 1] += w * eta[1] * transport;
            }
        }
    }

    // Outflow boundary integral.
    for e in &space.mesh.boundary_edges {
        let nrm = e.normal;
        let nodes = space.cell_nodes(e.triangle);
        let geom = space.geom(e.triangle);
        for (xq, l, w) in edge_quad_points(space, e) {
            let [x, y] = xq;
            let ub = u_b(x, y, t_end);
            if ub[0] * nrm[0] + ub[1] * nrm[1] < 0.0 {
                continue;
            }
            let (s, _) = space.shape(l);
            let g_ref = crate::space::grad_p2_ref(l);
            let mut u = [0.0f64; 2];
            let mut grad_u = [[0.0f64; 2]; 2];
            for i in 0..6 {
                let g = geom.grad(g_ref[i]);
                for c in 0..2 {
                    let coef = u_prev[2 * nodes[i] + c];
                    u[c] += coef * s[i];
                    grad_u[c][0] += coef * g[0];
                    grad_u[c][1] += coef * g[1];
                }
            }
            let conv = [
                u[0] * grad_u[0][0] + u[1] * grad_u[0][1],
                u[0] * grad_u[1][0] + u[1] * grad_u[1][1],
            ];
            let eta = [u[0] - 0.5 * dt * conv[0], u[1] - 0.5 * dt * conv[1]];
            let eta_n = eta[0] * nrm[0] + eta[1] * nrm[1];
            let factor = dt * w * eta_n;
            for i in 0..6 {
                rhs[2 * nodes[i]] -= factor * eta[0] * s[i];
                rhs[2 * nodes[i] + 1] -= factor * eta[1] * s[i];
            }
        }
    }

    Ok(rhs)
}

/// Index bookkeeping for symmetric Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct DirichletMap {
    /// Constrained DOFs, sorted.
    pub boundary: Vec<usize>,
    /// Free DOFs, sorted.
    pub interior: Vec<usize>,
    /// full index -> interior position, usize::MAX for constrained DOFs.
    pub full_to_interior: Vec<usize>,
}

impl DirichletMap {
    pub fn new(n_dofs: usize, boundary: Vec<usize>) -> Self {
        debug_assert!(boundary.windows(2).all(|w| w[0] < w[1]));
        let mut full_to_interior = vec![usize::MAX; n_dofs];
        for &b in &boundary {
            full_to_interior[b] = usize::MAX - 1; // mark
        }
        let mut interior = Vec::with_capacity(n_dofs - boundary.len());
        for i in 0..n_dofs {
            if full_to_interior[i] == usize::MAX {
                full_to_interior[i] = interior.len();
                interior.push(i);
            } else {
                full_to_interior[i] = usize::MAX;
            }
        }
        DirichletMap {
            boundary,
            interior,
            full_to_interior,
        }
    }
}

/// A symmetric system after row/column Dirichlet elimination: the interior
/// block and the interior-boundary coupling used for the RHS lift.
pub struct EliminatedSpd {
    pub map: DirichletMap,
    pub a_ii: CsrMatrix,
    /// Interior rows by boundary-position columns.
    pub a_ib: CsrMatrix,
}

/// Symmetric row/column elimination of `boundary_dofs` from an SPD matrix.
pub fn eliminate_spd(a: &CsrMatrix, boundary_dofs: Vec<usize>) -> EliminatedSpd {
    let map = DirichletMap::new(a.n_rows, boundary_dofs);
    let mut bpos = vec![usize::MAX; a.n_cols];
    for (p, &b) in map.boundary.iter().enumerate() {
        bpos[b] = p;
    }
    let a_ii = a.submatrix(&map.interior, &map.full_to_interior, map.interior.len());
    let a_ib = a.submatrix(&map.interior, &bpos, map.boundary.len());
    EliminatedSpd { map, a_ii, a_ib }
}

impl EliminatedSpd {
    /// rhs_I - A_IB u_B from a full-length RHS and boundary values.
    pub fn reduce_rhs(&self, rhs_full: &[f64], boundary_values: &[f64]) -> Vec<f64> {
        let ub: Vec<f64> = self.map.boundary.iter().map(|&b| boundary_values[b]).collect();
        let lift = self.a_ib.mul_vec(&ub);
        self.map
            .interior
            .iter()
            .zip(&lift)
            .map(|(&i, &l)| rhs_full[i] - l)
            .collect()
    }

    /// Assemble the full solution from interior unknowns and boundary data.
    pub fn scatter(&self, x_interior: &[f64], boundary_values: &[f64]) -> Vec<f64> {
        let n = self.map.full_to_interior.len();
        let mut full = vec![0.0; n];
        for (&i, &v) in self.map.interior.iter().zip(x_interior) {
            full[i] = v;
        }
        for &b in &self.map.boundary {
            full[b] = boundary_values[b];
        }
        full
    }
}

/// The generalized Stokes block system on a Taylor-Hood pair, with the
/// zero-mean pressure constraint bordered as a Lagrange multiplier. The
/// eliminated symmetric saddle matrix is time-invariant for fixed mesh,
/// step size and Reynolds number.
pub struct StokesSystem {
    /// Velocity block dt^-1 M + Re^-1 K on the full vector space.
    pub a_uu: CsrMatrix,
    /// Divergence coupling: rows = pressure DOFs, cols = velocity DOFs,
    /// entries (div phi_j, psi_q).
    pub b_div: CsrMatrix,
    /// Pressure-mean row (psi_q, 1).
    pub mean_row: Vec<f64>,
    /// Symmetric indefinite matrix over [interior velocity; pressure; mean
    /// multiplier].
    pub saddle: std::sync::Arc<CsrMatrix>,
    /// Node coordinates of each saddle row, for the ordering.
    pub row_coords: Vec<[f64; 2]>,
    /// Velocity Dirichlet bookkeeping (full boundary).
    pub vmap: DirichletMap,
    /// Interior-boundary coupling of a_uu for the RHS lift.
    pub a_ib: CsrMatrix,
    /// Pressure-row coupling to boundary velocity DOFs for the lift.
    pub b_bdry: CsrMatrix,
    /// Expected inertia sign per saddle row: +1 velocity, -1 pressure and
    /// multiplier. Consumed by the factorization's static pivoting.
    pub pivot_signs: Vec<i8>,
    pub n_vel: usize,
    pub n_pres: usize,
    pub dt: f64,
    pub re: f64,
    /// Identity of this assembled system; factorization handles check it.
    pub id: u64,
}

/// Assemble the generalized Stokes system for a quadratic-velocity,
/// linear-pressure pair on one mesh.
pub fn stokes_system(
    vel_space: &FeSpace,
    pres_space: &FeSpace,
    dt: f64,
    re: f64,
) -> Result<StokesSystem> {
    if vel_space.degree != 2 || vel_space.components != 2 {
        return Err(Error::invalid("velocity space must be quadratic, two components"));
    }
    if pres_space.degree != 1 || pres_space.components != 1 {
        return Err(Error::invalid("pressure space must be linear, scalar"));
    }
    if !std::sync::Arc::ptr_eq(&vel_space.mesh, &pres_space.mesh) {
        return Err(Error::invalid("velocity and pressure spaces use different meshes"));
    }
    assert!(dt > 0.0 && re > 0.0);

    let n_vel = vel_space.n_dofs();
    let n_pres = pres_space.n_dofs();
    let rule = triangle_degree6();
    let vtab = ShapeTable::new(vel_space, &rule);

    let dt_inv = 1.0 / dt;
    let re_inv = 1.0 / re;

    let mut a_builder = CsrBuilder::new(n_vel, n_vel);
    let mut b_builder = CsrBuilder::new(n_pres, n_vel);
    let mut grads = [[0.0f64; 2]; 6];
    let mut local = [[0.0f64; 6]; 6];

    for k in 0..vel_space.mesh.n_triangles() {
        let vnodes = vel_space.cell_nodes(k);
        let pnodes = pres_space.cell_nodes(k);
        let geom = vel_space.geom(k);
        let scale = 2.0 * geom.area;
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        let mut local_b = [[0.0f64; 12]; 3];
        for (q, (s, g_ref)) in vtab.at.iter().enumerate() {
            let w = scale * rule.weights[q];
            for i in 0..6 {
                grads[i] = geom.grad(g_ref[i]);
            }
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += w
                        * (dt_inv * s[i] * s[j]
                            + re_inv * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]));
                }
            }
            let sp = crate::space::shape_p1(rule.points[q]);
            for (qi, &spq) in sp.iter().enumerate() {
                let wp = w * spq;
                for j in 0..6 {
                    local_b[qi][2 * j] += wp * grads[j][0];
                    local_b[qi][2 * j + 1] += wp * grads[j][1];
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    a_builder.add(2 * vnodes[i] + c, 2 * vnodes[j] + c, local[i][j]);
                }
            }
        }
        for (qi, row) in local_b.iter().enumerate() {
            for j in 0..6 {
                b_builder.add(pnodes[qi], 2 * vnodes[j], row[2 * j]);
                b_builder.add(pnodes[qi], 2 * vnodes[j] + 1, row[2 * j + 1]);
            }
        }
    }

    // Pressure-mean row: (psi_q, 1) = row sums of the pressure mass matrix.
    let p_mass = mass_matrix(pres_space, false);
    let mean_row = p_mass.row_sums();

    let a_uu = a_builder.finish();
    let b_div = b_builder.finish();

    // Eliminated symmetric saddle matrix over [u_I; p; lambda].
    let vmap = DirichletMap::new(n_vel, vel_space.boundary_dofs_all());
    let mut bpos = vec![usize::MAX; n_vel];
    for (p, &b) in vmap.boundary.iter().enumerate() {
        bpos[b] = p;
    }
    let a_ii = a_uu.submatrix(&vmap.interior, &vmap.full_to_interior, vmap.interior.len());
    let a_ib = a_uu.submatrix(&vmap.interior, &bpos, vmap.boundary.len());
    let b_int = b_div.submatrix(
        &(0..n_pres).collect::<Vec<_>>(),
        &vmap.full_to_interior,
        vmap.interior.len(),
    );
    let b_bdry = b_div.submatrix(&(0..n_pres).collect::<Vec<_>>(), &bpos, vmap.boundary.len());

    let n_int = vmap.interior.len();
    let n_total = n_int + n_pres + 1;
    let mut s_builder = CsrBuilder::new(n_total, n_total);
    for i in 0..n_int {
        let (cols, vals) = a_ii.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            s_builder.add(i, j, v);
        }
    }
    for q in 0..n_pres {
        let (cols, vals) = b_int.row(q);
        for (&j, &v) in cols.iter().zip(vals) {
            s_builder.add(n_int + q, j, -v);
            s_builder.add(j, n_int + q, -v);
        }
        s_builder.add(n_int + q, n_total - 1, -mean_row[q]);
        s_builder.add(n_total - 1, n_int + q, -mean_row[q]);
    }
    let saddle = std::sync::Arc::new(s_builder.finish());

    let mut pivot_signs = vec![1i8; n_total];
    for s in pivot_signs.iter_mut().skip(n_int) {
        *s = -1;
    }

    let mut row_coords = Vec::with_capacity(n_total);
    for &dof in &vmap.interior {
        row_coords.push(vel_space.dof_coords[dof / 2]);
    }
    row_coords.extend_from_slice(&pres_space.dof_coords);
    row_coords.push([0.5, 0.5]);

    static STOKES_ID: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(1);
    let id = STOKES_ID.fetch_add(1, std::sync::atomic::Ordering::Relaxed);

    Ok(StokesSystem {
        a_uu,
        b_div,
        mean_row,
        saddle,
        row_coords,
        vmap,
        a_ib,
        b_bdry,
        pivot_signs,
        n_vel,
        n_pres,
        dt,
        re,
        id,
    })
}

impl FeSpace {
    /// All component-expanded boundary DOFs, sorted.
    pub fn boundary_dofs_all(&self) -> Vec<usize> {
        let mut dofs: Vec<usize> = self
            .all_boundary_nodes()
            .iter()
            .flat_map(|&n| (0..self.components).map(move |c| n * self.components + c))
            .collect();
        dofs.sort_unstable();
        dofs
    }
}

impl StokesSystem {
    /// Full saddle RHS [F_I - A_IB u_B; B_B u_B; 0] from the velocity load
    /// F (full length) and the boundary velocity values.
    pub fn assemble_rhs(&self, f_vel: &[f64], u_boundary: &[f64]) -> Vec<f64> {
        let n_int = self.vmap.interior.len();
        let ub: Vec<f64> = self.vmap.boundary.iter().map(|&b| u_boundary[b]).collect();
        let lift = self.a_ib.mul_vec(&ub);
        let mut rhs = vec![0.0; n_int + self.n_pres + 1];
        for (pos, (&i, &l)) in self.vmap.interior.iter().zip(&lift).enumerate() {
            rhs[pos] = f_vel[i] - l;
        }
        let g_lift = self.b_bdry.mul_vec(&ub);
        rhs[n_int..n_int + self.n_pres].copy_from_slice(&g_lift);
        rhs
    }

    /// Split a saddle solution into full velocity (with boundary data) and
    /// pressure.
    pub fn split_solution(&self, x: &[f64], u_boundary: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_int = self.vmap.interior.len();
        let mut vel = vec![0.0; self.n_vel];
        for (pos, &i) in self.vmap.interior.iter().enumerate() {
            vel[i] = x[pos];
        }
        for &b in &self.vmap.boundary {
            vel[b] = u_boundary[b];
        }
        let pres = x[n_int..n_int + self.n_pres].to_vec();
        (vel, pres)
    }

    /// Discrete divergence residual (div u, psi_q) for all pressure tests.
    pub fn divergence_residual(&self, velocity: &[f64]) -> Vec<f64> {
        self.b_div.mul_vec(velocity)
    }
}
