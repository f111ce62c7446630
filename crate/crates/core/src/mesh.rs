//! Structured triangulations of the unit square.
//!
//! An `n`-subdivision mesh has (n+1)^2 vertices, 2n^2 triangles (each grid
//! cell is split along its lower-left to upper-right diagonal) and 4n
//! boundary edges. Triangles are counterclockwise; boundary edges carry the
//! outward unit normal and a side tag.

use crate::error::{Error, Result};

/// Which side of the unit square a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
            Side::Bottom => 2,
            Side::Top => 3,
        }
    }

    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

/// Boundary edge: vertex pair, outward normal, side tag and the unique
/// adjacent triangle (used for one-sided traces).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub normal: [f64; 2],
    pub side: Side,
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    /// Number of subdivisions per side.
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

impl TriangleMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Mesh size h = longest edge = sqrt(2)/n.
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n as f64
    }

    pub fn triangle_vertices(&self, k: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of triangle k (positive for counterclockwise).
    pub fn signed_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(k);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// True if a vertex lies on the given side of the unit square.
    pub fn vertex_on_side(&self, v: usize, side: Side) -> bool {
        let [x, y] = self.vertices[v];
        match side {
            Side::Left => x == 0.0,
            Side::Right => x == 1.0,
            Side::Bottom => y == 0.0,
            Side::Top => y == 1.0,
        }
    }

    /// Sides incident to a point of the closed unit square (two at corners).
    pub fn sides_at(point: [f64; 2]) -> Vec<Side> {
        let mut sides = Vec::with_capacity(2);
        if point[0] == 0.0 {
            sides.push(Side::Left);
        }
        if point[0] == 1.0 {
            sides.push(Side::Right);
        }
        if point[1] == 0.0 {
            sides.push(Side::Bottom);
        }
        if point[1] == 1.0 {
            sides.push(Side::Top);
        }
        sides
    }

    /// Locate the triangle containing a point of [0,1]^2 and return its
    /// index. Points on cell edges resolve deterministically.
    pub fn locate(&self, x: f64, y: f64) -> usize {
        let n = self.n;
        let clamp = |t: f64| t.clamp(0.0, 1.0);
        let (x, y) = (clamp(x), clamp(y));
        let i = ((x * n as f64).floor() as usize).min(n - 1);
        let j = ((y * n as f64).floor() as usize).min(n - 1);
        let fx = x * n as f64 - i as f64;
        let fy = y * n as f64 - j as f64;
        let cell = j * n + i;
        // Cell diagonal runs lower-left to upper-right: below it (fy <= fx)
        // is the lower triangle.
        if fy <= fx {
            2 * cell
        } else {
            2 * cell + 1
        }
    }
}

/// Build the uniform `n`-subdivision triangulation of the unit square.
pub fn build_uniform_unit_square(n: usize) -> Result<TriangleMesh> {
    if n == 0 {
        return Err(Error::invalid("mesh subdivision count must be >= 1"));
    }
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let vid = |i: usize, j: usize| j * np + i;

    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let ll = vid(i, j);
            let lr = vid(i + 1, j);
            let ul = vid(i, j + 1);
            let ur = vid(i + 1, j + 1);
            // Split along ll -> ur.
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }

    // Triangle index of cell (i, j): lower = 2(j n + i), upper = +1.
    let lower = |i: usize, j: usize| 2 * (j * n + i);
    let upper = |i: usize, j: usize| 2 * (j * n + i) + 1;

    let mut boundary_edges = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(i, 0), vid(i + 1, 0)],
            normal: Side::Bottom.normal(),
            side: Side::Bottom,
            triangle: lower(i, 0),
        });
    }
    for j in 0..n {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(n, j), vid(n, j + 1)],
            normal: Side::Right.normal(),
            side: Side::Right,
            triangle: lower(n - 1, j),
        });
    }
    for i in 0..n {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(i, n), vid(i + 1, n)],
            normal: Side::Top.normal(),
            side: Side::Top,
            triangle: upper(i, n - 1),
        });
    }
    for j in 0..n {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(0, j), vid(0, j + 1)],
            normal: Side::Left.normal(),
            side: Side::Left,
            triangle: upper(0, j),
        });
    }

    Ok(TriangleMesh {
        n,
        vertices,
        triangles,
        boundary_edges,
    })
}
