//! Discontinuous fields as ASCII VTK unstructured grid (`.vtu`) files.
//!
//! Every cell is split into `s^2` sub-triangles on the lattice of points
//! `(i / s, j / s)`, `i + j <= s`, of the reference triangle. Lattice points
//! are duplicated per cell so jumps between cells are preserved.

use std::io::{self, Write};

use mdg_core::postprocess::pressure_of;
use mdg_core::{FieldCoefficients, Mesh};

/// Reference lattice points of a cell split `s` times per edge.
pub fn lattice_points(s: usize) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity((s + 1) * (s + 2) / 2);
    for j in 0..=s {
        for i in 0..=s - j {
            pts.push([i as f64 / s as f64, j as f64 / s as f64]);
        }
    }
    pts
}

/// Counterclockwise sub-triangles of the lattice, as local point indices.
pub fn lattice_triangles(s: usize) -> Vec<[usize; 3]> {
    let row_start = |j: usize| (0..j).map(|jj| s + 1 - jj).sum::<usize>();
    let idx = |i: usize, j: usize| row_start(j) + i;
    let mut tris = Vec::with_capacity(s * s);
    for j in 0..s {
        for i in 0..s - j {
            tris.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
            if i + j + 1 < s {
                tris.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
    }
    tris
}

/// A point field with one or three components per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField {
    pub name: &'static str,
    pub components: usize,
    pub values: Vec<f64>,
}

fn sample<F>(mesh: &Mesh, field: &FieldCoefficients, s: usize, mut push: F)
where
    F: FnMut(&FieldCoefficients, usize, &mdg_core::AffineMap, &mdg_core::basis::BasisTable),
{
    let table = field.space.basis().tabulate(&lattice_points(s));
    for (cell, map) in mesh.affine_maps().iter().enumerate() {
        push(field, cell, map, &table);
    }
}

/// `(u_1, u_2, 0)` at the lattice points.
pub fn velocity_field(mesh: &Mesh, velocity: &FieldCoefficients, s: usize) -> PointField {
    let mut values = Vec::new();
    sample(mesh, velocity, s, |f, cell, map, table| {
        for v in f.vector_samples(cell, map, table) {
            values.extend([v.value[0], v.value[1], 0.0]);
        }
    });
    PointField { name: "u", components: 3, values }
}

/// `sqrt(t11^2 + 2 t12^2 + t22^2)` of the stress at the lattice points.
pub fn stress_intensity_field(mesh: &Mesh, sigma: &FieldCoefficients, s: usize) -> PointField {
    let mut values = Vec::new();
    sample(mesh, sigma, s, |f, cell, map, table| {
        values.extend(f.tensor_samples(cell, map, table).iter().map(|t| t.value.frobenius()));
    });
    PointField { name: "stress_intensity", components: 1, values }
}

/// `-tr(sigma_h) / 2` at the lattice points.
pub fn pressure_field(mesh: &Mesh, sigma: &FieldCoefficients, s: usize) -> PointField {
    let mut values = Vec::new();
    sample(mesh, sigma, s, |f, cell, map, table| {
        values.extend(f.tensor_samples(cell, map, table).iter().map(|t| pressure_of(t.value)));
    });
    PointField { name: "p", components: 1, values }
}

/// Write `field` on the subdivided mesh. `comment` goes into an XML comment
/// ahead of the grid.
pub fn write_vtu<W: Write>(
    mut w: W,
    mesh: &Mesh,
    s: usize,
    field: &PointField,
    comment: Option<&str>,
) -> io::Result<()> {
    let local_pts = lattice_points(s);
    let local_tris = lattice_triangles(s);
    let per_cell = local_pts.len();
    let n_points = per_cell * mesh.num_cells();
    let n_cells = local_tris.len() * mesh.num_cells();
    if field.values.len() != n_points * field.components {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("field {} has {} values for {n_points} points", field.name, field.values.len()),
        ));
    }
    writeln!(w, "<?xml version=\"1.0\"?>")?;
    if let Some(c) = comment {
        writeln!(w, "<!-- {} -->", c.replace("--", "- -"))?;
    }
    writeln!(w, "<VTKFile type=\"UnstructuredGrid\" version=\"0.1\" byte_order=\"LittleEndian\">")?;
    writeln!(w, "  <UnstructuredGrid>")?;
    writeln!(w, "    <Piece NumberOfPoints=\"{n_points}\" NumberOfCells=\"{n_cells}\">")?;
    let kind = if field.components == 1 { "Scalars" } else { "Vectors" };
    writeln!(w, "      <PointData {kind}=\"{}\">", field.name)?;
    writeln!(
        w,
        "        <DataArray type=\"Float64\" Name=\"{}\" NumberOfComponents=\"{}\" format=\"ascii\">",
        field.name, field.components
    )?;
    for chunk in field.values.chunks(field.components) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "          {}", line.join(" "))?;
    }
    writeln!(w, "        </DataArray>")?;
    writeln!(w, "      </PointData>")?;
    writeln!(w, "      <Points>")?;
    writeln!(w, "        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"ascii\">")?;
    for map in mesh.affine_maps() {
        for xi in &local_pts {
            let x = map.map(*xi);
            writeln!(w, "          {:e} {:e} 0", x[0], x[1])?;
        }
    }
    writeln!(w, "        </DataArray>")?;
    writeln!(w, "      </Points>")?;
    writeln!(w, "      <Cells>")?;
    writeln!(w, "        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"ascii\">")?;
    for cell in 0..mesh.num_cells() {
        let base = cell * per_cell;
        for t in &local_tris {
            writeln!(w, "          {} {} {}", base + t[0], base + t[1], base + t[2])?;
        }
    }
    writeln!(w, "        </DataArray>")?;
    writeln!(w, "        <DataArray type=\"Int64\" Name=\"offsets\" format=\"ascii\">")?;
    for i in 1..=n_cells {
        writeln!(w, "          {}", 3 * i)?;
    }
    writeln!(w, "        </DataArray>")?;
    writeln!(w, "        <DataArray type=\"UInt8\" Name=\"types\" format=\"ascii\">")?;
    for _ in 0..n_cells {
        // VTK_TRIANGLE
        writeln!(w, "          5")?;
    }
    writeln!(w, "        </DataArray>")?;
    writeln!(w, "      </Cells>")?;
    writeln!(w, "    </Piece>")?;
    writeln!(w, "  </UnstructuredGrid>")?;
    writeln!(w, "</VTKFile>")?;
    w.flush()
}

/// Metadata comment of the stress intensity file.
pub const STRESS_INTENSITY_NOTE: &str =
    "stress_intensity is the Frobenius norm sqrt(t11^2 + 2 t12^2 + t22^2) of the pseudostress sigma_h";
