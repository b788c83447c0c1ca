//! Legacy ASCII VTK export of meshes and fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::assembly::FlatField;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Writes an unstructured grid.
///
/// A `dim`-component field is a deformation: points are its values and the
/// displacement `v − x` is attached as point vectors. Any other field is
/// attached as point scalars (one array per component) over the flat mesh.
/// `densities` become cell scalars.
pub fn write_vtk<W: Write>(mut w: W, mesh: &Mesh, field: Option<&FlatField>, densities: Option<&[f64]>, title: &str) -> Result<()> {
    let nn = mesh.nn();
    let ne = mesh.ne();
    let dim = mesh.dim;
    let nloc = mesh.nloc();
    if let Some(v) = field {
        if v.nn() != nn {
            return Err(Error::InvalidArgument("field does not match the mesh".into()));
        }
    }
    if densities.is_some_and(|d| d.len() != ne) {
        return Err(Error::InvalidArgument("one density per element expected".into()));
    }
    let deformation = field.filter(|v| v.ncomp == dim);

    writeln!(w, "# vtk DataFile Version 2.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nn} double")?;
    for i in 0..nn {
        let p = deformation.map_or(mesh.coord(i), |v| v.node(i));
        let z = if dim == 3 { p[2] } else { 0.0 };
        writeln!(w, "{} {} {}", p[0], p[1], z)?;
    }
    writeln!(w, "CELLS {ne} {}", ne * (nloc + 1))?;
    for k in 0..ne {
        write!(w, "{nloc}")?;
        for &n in mesh.elem(k) {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    let cell_type = if dim == 3 { 10 } else { 5 };
    for _ in 0..ne {
        writeln!(w, "{cell_type}")?;
    }
    if let Some(dens) = densities {
        writeln!(w, "CELL_DATA {ne}")?;
        writeln!(w, "SCALARS density double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for x in dens {
            writeln!(w, "{x}")?;
        }
    }
    if let Some(v) = field {
        writeln!(w, "POINT_DATA {nn}")?;
        if deformation.is_some() {
            writeln!(w, "VECTORS displacement double")?;
            for i in 0..nn {
                let (x, p) = (mesh.coord(i), v.node(i));
                let z = if dim == 3 { p[2] - x[2] } else { 0.0 };
                writeln!(w, "{} {} {}", p[0] - x[0], p[1] - x[1], z)?;
            }
        } else {
            for j in 0..v.ncomp {
                writeln!(w, "SCALARS u{j} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for i in 0..nn {
                    writeln!(w, "{}", v.get(i, j))?;
                }
            }
        }
    }
    Ok(())
}

/// [`write_vtk`] into a file at `path`.
pub fn export_vtk(path: &Path, mesh: &Mesh, field: Option<&FlatField>, densities: Option<&[f64]>) -> Result<()> {
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("patchfem");
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(&mut w, mesh, field, densities, title)?;
    w.flush()?;
    Ok(())
}
