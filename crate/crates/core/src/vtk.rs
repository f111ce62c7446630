//! ASCII legacy VTK output: meshes as linear triangle grids, fields on
//! their space's nodes (quadratic spaces emit quadratic triangle cells).

use std::io::Write;

use crate::error::Result;
use crate::mesh::TriangleMesh;
use crate::space::FeSpace;

const HEADER: &str = "# vtk DataFile Version 3.0";

pub fn write_mesh<W: Write>(out: &mut W, mesh: &TriangleMesh, title: &str) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for v in &mesh.vertices {
        writeln!(out, "{:.17} {:.17} 0.0", v[0], v[1])?;
    }
    writeln!(out, "CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.n_triangles())?;
    for _ in 0..mesh.n_triangles() {
        writeln!(out, "5")?;
    }
    Ok(())
}

/// Geometry section for a field on `space` nodes: linear (type 5) or
/// quadratic (type 22) triangles.
fn write_space_grid<W: Write>(out: &mut W, space: &FeSpace, title: &str) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", space.n_nodes())?;
    for c in &space.dof_coords {
        writeln!(out, "{:.17} {:.17} 0.0", c[0], c[1])?;
    }
    let n_cells = space.mesh.n_triangles();
    let per = space.nodes_per_cell;
    writeln!(out, "CELLS {} {}", n_cells, (per + 1) * n_cells)?;
    for k in 0..n_cells {
        write!(out, "{per}")?;
        for &nd in space.cell_nodes(k) {
            write!(out, " {nd}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {n_cells}")?;
    let cell_type = if space.degree == 1 { 5 } else { 22 };
    for _ in 0..n_cells {
        writeln!(out, "{cell_type}")?;
    }
    writeln!(out, "POINT_DATA {}", space.n_nodes())?;
    Ok(())
}

pub fn write_scalar_field<W: Write>(
    out: &mut W,
    space: &FeSpace,
    field: &[f64],
    name: &str,
) -> Result<()> {
    assert_eq!(space.components, 1);
    assert_eq!(field.len(), space.n_dofs());
    write_space_grid(out, space, name)?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in field {
        writeln!(out, "{v:.17}")?;
    }
    Ok(())
}

pub fn write_vector_field<W: Write>(
    out: &mut W,
    space: &FeSpace,
    field: &[f64],
    name: &str,
) -> Result<()> {
    assert_eq!(space.components, 2);
    assert_eq!(field.len(), space.n_dofs());
    write_space_grid(out, space, name)?;
    writeln!(out, "VECTORS {name} double")?;
    for node in 0..space.n_nodes() {
        writeln!(out, "{:.17} {:.17} 0.0", field[2 * node], field[2 * node + 1])?;
    }
    Ok(())
}
