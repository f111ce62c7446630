//! Scalar and vector Lagrange finite element spaces (P1, P2) on a triangle
//! mesh, nodal interpolation, and classification of the inflow boundary.
//!
//! DOF layout: scalar nodes are numbered vertices-first (P2 appends one node
//! per mesh edge, placed at the midpoint); a vector space interleaves
//! components, `dof = node * components + component`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Side, TriangleMesh};

/// P1 shape values at a barycentric point.
#[inline]
pub fn shape_p1(l: [f64; 3]) -> [f64; 3] {
    l
}

/// Reference gradients of the P1 basis (constant).
#[inline]
pub fn grad_p1_ref() -> [[f64; 2]; 3] {
    [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
}

/// P2 shape values; node order is [v0, v1, v2, m01, m12, m20].
#[inline]
pub fn shape_p2(l: [f64; 3]) -> [f64; 6] {
    let [l0, l1, l2] = l;
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

/// Reference gradients of the P2 basis at a barycentric point.
#[inline]
pub fn grad_p2_ref(l: [f64; 3]) -> [[f64; 2]; 6] {
    let g = grad_p1_ref();
    let [l0, l1, l2] = l;
    let mut out = [[0.0; 2]; 6];
    for d in 0..2 {
        out[0][d] = (4.0 * l0 - 1.0) * g[0][d];
        out[1][d] = (4.0 * l1 - 1.0) * g[1][d];
        out[2][d] = (4.0 * l2 - 1.0) * g[2][d];
        out[3][d] = 4.0 * (l1 * g[0][d] + l0 * g[1][d]);
        out[4][d] = 4.0 * (l2 * g[1][d] + l1 * g[2][d]);
        out[5][d] = 4.0 * (l0 * g[2][d] + l2 * g[0][d]);
    }
    out
}

/// Reference Hessians (xx, xy, yy) of the P2 basis — constant per function.
#[inline]
pub fn hess_p2_ref() -> [[f64; 3]; 6] {
    let g = grad_p1_ref();
    let quad = |a: [f64; 2]| [4.0 * a[0] * a[0], 4.0 * a[0] * a[1], 4.0 * a[1] * a[1]];
    let cross = |a: [f64; 2], b: [f64; 2]| {
        [
            8.0 * a[0] * b[0],
            4.0 * (a[0] * b[1] + a[1] * b[0]),
            8.0 * a[1] * b[1],
        ]
    };
    [
        quad(g[0]),
        quad(g[1]),
        quad(g[2]),
        cross(g[0], g[1]),
        cross(g[1], g[2]),
        cross(g[2], g[0]),
    ]
}

/// Per-element affine geometry: maps reference derivatives to physical ones.
#[derive(Debug, Clone, Copy)]
pub struct ElemGeom {
    /// Inverse-transpose Jacobian, row-major.
    pub jinv_t: [[f64; 2]; 2],
    pub area: f64,
}

impl ElemGeom {
    pub fn from_vertices(v: [[f64; 2]; 3]) -> Self {
        let j = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // inv(J)^T = adj(J)^T / det.
        let jinv_t = [
            [j[1][1] / det, -j[1][0] / det],
            [-j[0][1] / det, j[0][0] / det],
        ];
        ElemGeom {
            jinv_t,
            area: 0.5 * det,
        }
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn grad(&self, g_ref: [f64; 2]) -> [f64; 2] {
        [
            self.jinv_t[0][0] * g_ref[0] + self.jinv_t[0][1] * g_ref[1],
            self.jinv_t[1][0] * g_ref[0] + self.jinv_t[1][1] * g_ref[1],
        ]
    }

    /// Physical Hessian (xx, xy, yy) from a reference Hessian.
    #[inline]
    pub fn hess(&self, h_ref: [f64; 3]) -> [f64; 3] {
        // H_x = Jinv^T H_ref Jinv; with A = Jinv^T (row-major above).
        let a = self.jinv_t;
        let h = [[h_ref[0], h_ref[1]], [h_ref[1], h_ref[2]]];
        let mut ah = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                ah[r][c] = a[r][0] * h[0][c] + a[r][1] * h[1][c];
            }
        }
        // (A H) A^T
        [
            ah[0][0] * a[0][0] + ah[0][1] * a[0][1],
            ah[0][0] * a[1][0] + ah[0][1] * a[1][1],
            ah[1][0] * a[1][0] + ah[1][1] * a[1][1],
        ]
    }
}

/// A P1 or P2 Lagrange space, scalar or with two interleaved components.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Arc<TriangleMesh>,
    pub degree: usize,
    pub components: usize,
    /// Coordinates of every scalar node.
    pub dof_coords: Vec<[f64; 2]>,
    /// Scalar node indices per cell, `nodes_per_cell` each.
    cell_nodes: Vec<usize>,
    pub nodes_per_cell: usize,
    /// Scalar node indices on each side of the square (sorted).
    boundary_nodes: [Vec<usize>; 4],
    /// For P2: global edge index of each mesh boundary edge.
    boundary_edge_to_edge: Vec<usize>,
    geom: Vec<ElemGeom>,
}

impl FeSpace {
    pub fn n_nodes(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.components * self.n_nodes()
    }

    pub fn cell_nodes(&self, k: usize) -> &[usize] {
        &self.cell_nodes[k * self.nodes_per_cell..(k + 1) * self.nodes_per_cell]
    }

    pub fn geom(&self, k: usize) -> &ElemGeom {
        &self.geom[k]
    }

    /// Scalar node indices on a side (corners appear on both their sides).
    pub fn boundary_nodes(&self, side: Side) -> &[usize] {
        &self.boundary_nodes[side.index()]
    }

    /// All boundary scalar nodes, sorted and deduplicated.
    pub fn all_boundary_nodes(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.boundary_nodes.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Component-expanded DOF indices on a side, sorted.
    pub fn boundary_dofs(&self, side: Side) -> Vec<usize> {
        let mut dofs: Vec<usize> = self
            .boundary_nodes(side)
            .iter()
            .flat_map(|&n| (0..self.components).map(move |c| n * self.components + c))
            .collect();
        dofs.sort_unstable();
        dofs
    }

    /// The midpoint node of a mesh boundary edge (P2 only).
    pub fn boundary_edge_midpoint_node(&self, boundary_edge: usize) -> Option<usize> {
        if self.degree == 2 {
            Some(self.mesh.n_vertices() + self.boundary_edge_to_edge[boundary_edge])
        } else {
            None
        }
    }

    /// Shape values of all local basis functions at a barycentric point.
    pub fn shape(&self, l: [f64; 3]) -> ([f64; 6], usize) {
        if self.degree == 1 {
            let s = shape_p1(l);
            ([s[0], s[1], s[2], 0.0, 0.0, 0.0], 3)
        } else {
            (shape_p2(l), 6)
        }
    }

    /// Physical gradients of all local basis functions on element k.
    pub fn shape_grad(&self, k: usize, l: [f64; 3]) -> ([[f64; 2]; 6], usize) {
        let geom = &self.geom[k];
        if self.degree == 1 {
            let gr = grad_p1_ref();
            let mut out = [[0.0; 2]; 6];
            for (o, g) in out.iter_mut().zip(gr.iter()) {
                *o = geom.grad(*g);
            }
            ([out[0], out[1], out[2], [0.0; 2], [0.0; 2], [0.0; 2]], 3)
        } else {
            let gr = grad_p2_ref(l);
            let mut out = [[0.0; 2]; 6];
            for (o, g) in out.iter_mut().zip(gr.iter()) {
                *o = geom.grad(*g);
            }
            (out, 6)
        }
    }

    /// Evaluate a scalar coefficient field at an arbitrary point.
    pub fn eval_scalar(&self, coeffs: &[f64], x: f64, y: f64) -> f64 {
        assert_eq!(self.components, 1);
        let k = self.mesh.locate(x, y);
        let l = self.barycentric(k, x, y);
        let (s, nl) = self.shape(l);
        let nodes = self.cell_nodes(k);
        (0..nl).map(|i| coeffs[nodes[i]] * s[i]).sum()
    }

    /// Evaluate a two-component coefficient field at an arbitrary point.
    pub fn eval_vector(&self, coeffs: &[f64], x: f64, y: f64) -> [f64; 2] {
        assert_eq!(self.components, 2);
        let k = self.mesh.locate(x, y);
        let l = self.barycentric(k, x, y);
        let (s, nl) = self.shape(l);
        let nodes = self.cell_nodes(k);
        let mut out = [0.0; 2];
        for i in 0..nl {
            for c in 0..2 {
                out[c] += coeffs[2 * nodes[i] + c] * s[i];
            }
        }
        out
    }

    pub fn barycentric(&self, k: usize, x: f64, y: f64) -> [f64; 3] {
        let [a, b, c] = self.mesh.triangle_vertices(k);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Build a P1 or P2 Lagrange space over `mesh`.
pub fn build_space(mesh: Arc<TriangleMesh>, degree: usize, components: usize) -> Result<FeSpace> {
    if degree != 1 && degree != 2 {
        return Err(Error::invalid(format!("unsupported degree {degree}")));
    }
    if components != 1 && components != 2 {
        return Err(Error::invalid(format!("unsupported component count {components}")));
    }

    let nv = mesh.n_vertices();
    let mut dof_coords: Vec<[f64; 2]> = mesh.vertices.clone();
    let nodes_per_cell = if degree == 1 { 3 } else { 6 };
    let mut cell_nodes = Vec::with_capacity(mesh.n_triangles() * nodes_per_cell);

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    if degree == 1 {
        for t in &mesh.triangles {
            cell_nodes.extend_from_slice(t);
        }
    } else {
        for t in &mesh.triangles {
            cell_nodes.extend_from_slice(t);
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                let next = edge_index.len();
                let idx = *edge_index.entry(key).or_insert(next);
                if idx == next {
                    let pa = mesh.vertices[a];
                    let pb = mesh.vertices[b];
                    dof_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                }
                cell_nodes.push(nv + idx);
            }
        }
    }

    let mut boundary_nodes: [Vec<usize>; 4] = Default::default();
    let mut boundary_edge_to_edge = Vec::with_capacity(mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let set = &mut boundary_nodes[e.side.index()];
        set.extend_from_slice(&e.vertices);
        if degree == 2 {
            let key = (e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1]));
            let idx = edge_index[&key];
            set.push(nv + idx);
            boundary_edge_to_edge.push(idx);
        }
    }
    for set in &mut boundary_nodes {
        set.sort_unstable();
        set.dedup();
    }

    let geom = (0..mesh.n_triangles())
        .map(|k| ElemGeom::from_vertices(mesh.triangle_vertices(k)))
        .collect();

    Ok(FeSpace {
        mesh,
        degree,
        components,
        dof_coords,
        cell_nodes,
        nodes_per_cell,
        boundary_nodes,
        boundary_edge_to_edge,
        geom,
    })
}

/// Nodal interpolation of a scalar space-time function at time `t`.
pub fn interpolate<F>(space: &FeSpace, g: F, t: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, f64) -> f64,
{
    assert_eq!(space.components, 1, "interpolate expects a scalar space");
    let mut out = Vec::with_capacity(space.n_nodes());
    for &[x, y] in &space.dof_coords {
        let v = g(x, y, t);
        if !v.is_finite() {
            return Err(Error::NumericInput {
                what: "interpolated function",
                x,
                y,
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Nodal interpolation of a vector space-time function at time `t`.
pub fn interpolate_vector<F>(space: &FeSpace, g: F, t: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, f64) -> [f64; 2],
{
    assert_eq!(space.components, 2, "interpolate_vector expects a vector space");
    let mut out = Vec::with_capacity(space.n_dofs());
    for &[x, y] in &space.dof_coords {
        let v = g(x, y, t);
        if !v[0].is_finite() || !v[1].is_finite() {
            return Err(Error::NumericInput {
                what: "interpolated function",
                x,
                y,
            });
        }
        out.extend_from_slice(&v);
    }
    Ok(out)
}

/// The inflow part of the boundary at one time level: nodes (and the DOFs
/// they expand to) where the advecting field points into the domain.
#[derive(Debug, Clone, Default)]
pub struct InflowSet {
    pub time: f64,
    /// Scalar node indices, sorted.
    pub nodes: Vec<usize>,
    /// Component-expanded DOF indices, sorted.
    pub dof_indices: Vec<usize>,
    /// Mesh boundary edges whose endpoints and midpoint all test inflow.
    pub edge_indices: Vec<usize>,
}

impl InflowSet {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Classify the inflow boundary for an advecting field `b` at time `t`:
/// a boundary node belongs to the set iff b . n < 0 strictly, using the
/// outward normal of its side (corner nodes test both incident sides and
/// join on either pass). At the square's corners the field is evaluated a
/// whisker inside the side under test, so discontinuous boundary data (the
/// driven lid) is classified by its side trace rather than by the ambiguous
/// corner value.
pub fn classify_inflow<F>(space: &FeSpace, b: F, t: f64) -> InflowSet
where
    F: Fn(f64, f64, f64) -> [f64; 2],
{
    const NUDGE: f64 = 1e-9;
    let is_inflow = |p: [f64; 2], side: Side| {
        let n = side.normal();
        let [mut x, mut y] = p;
        let corner = (x == 0.0 || x == 1.0) && (y == 0.0 || y == 1.0);
        if corner {
            // Move tangentially into the side's interior.
            match side {
                Side::Left | Side::Right => y = if y == 0.0 { NUDGE } else { 1.0 - NUDGE },
                Side::Bottom | Side::Top => x = if x == 0.0 { NUDGE } else { 1.0 - NUDGE },
            }
        }
        let v = b(x, y, t);
        v[0] * n[0] + v[1] * n[1] < 0.0
    };

    let mut nodes = Vec::new();
    for side in Side::ALL {
        for &node in space.boundary_nodes(side) {
            if is_inflow(space.dof_coords[node], side) {
                nodes.push(node);
            }
        }
    }
    nodes.sort_unstable();
    nodes.dedup();

    let mut edge_indices = Vec::new();
    for (ei, e) in space.mesh.boundary_edges.iter().enumerate() {
        let pa = space.mesh.vertices[e.vertices[0]];
        let pb = space.mesh.vertices[e.vertices[1]];
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        if is_inflow(pa, e.side) && is_inflow(pb, e.side) && is_inflow(mid, e.side) {
            edge_indices.push(ei);
        }
    }

    let dof_indices = nodes
        .iter()
        .flat_map(|&nd| (0..space.components).map(move |c| nd * space.components + c))
        .collect();

    InflowSet {
        time: t,
        nodes,
        dof_indices,
        edge_indices,
    }
}
