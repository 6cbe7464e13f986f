//! File output: VTK legacy ASCII for meshes and fields, CSV for edge fluxes.
//!
//! All numbers are serialized with 17 significant digits so regression diffs
//! of output files are meaningful; rendering is pure string construction, so
//! identical inputs produce bitwise-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::Mesh;
use crate::{CfoError, Result};

/// 17-significant-digit serialization used in every output file.
fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

fn vtk_header(out: &mut String, title: &str, mesh: &Mesh) {
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{} {} 0", fmt_full(p[0]), fmt_full(p[1]));
    }
    let nt = mesh.triangles.len();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "5");
    }
}

fn cell_scalars(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "CELL_DATA {}", values.len());
    let _ = writeln!(out, "SCALARS {name} double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for &v in values {
        let _ = writeln!(out, "{}", fmt_full(v));
    }
}

/// Render the bare mesh as a VTK legacy ASCII unstructured grid
/// (triangles, cell type 5).
pub fn mesh_vtk(mesh: &Mesh) -> String {
    let mut out = String::new();
    vtk_header(&mut out, "cfo mesh", mesh);
    out
}

/// Render a solved field: nodal values as point data `u`, per-element
/// multipliers as cell data `lambda`.
pub fn solution_vtk(mesh: &Mesh, u: &[f64], lambda: &[f64]) -> Result<String> {
    if u.len() != mesh.nodes.len() || lambda.len() != mesh.num_triangles() {
        return Err(CfoError::Io(std::io::Error::other(format!(
            "solution fields sized {} nodes / {} elements do not fit a mesh with {} nodes / {} elements",
            u.len(),
            lambda.len(),
            mesh.nodes.len(),
            mesh.num_triangles()
        ))));
    }
    let mut out = String::new();
    vtk_header(&mut out, "cfo solution", mesh);
    let _ = writeln!(out, "POINT_DATA {}", u.len());
    let _ = writeln!(out, "SCALARS u double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for &v in u {
        let _ = writeln!(out, "{}", fmt_full(v));
    }
    cell_scalars(&mut out, "lambda", lambda);
    Ok(out)
}

/// Render a saturation snapshot as cell data `saturation`.
pub fn saturation_vtk(mesh: &Mesh, s: &[f64]) -> Result<String> {
    if s.len() != mesh.num_triangles() {
        return Err(CfoError::Io(std::io::Error::other(format!(
            "saturation field sized {} does not fit a mesh with {} elements",
            s.len(),
            mesh.num_triangles()
        ))));
    }
    let mut out = String::new();
    vtk_header(&mut out, "cfo saturation", mesh);
    cell_scalars(&mut out, "saturation", s);
    Ok(out)
}

/// Render per-edge fluxes as CSV with header `edge_id,n_x,n_y,flux`: one row
/// per edge with its fixed unit normal and the scalar flux along it.
pub fn edge_flux_csv(mesh: &Mesh, q: &[f64]) -> Result<String> {
    if q.len() != mesh.num_edges() {
        return Err(CfoError::Io(std::io::Error::other(format!(
            "flux field sized {} does not fit a mesh with {} edges",
            q.len(),
            mesh.num_edges()
        ))));
    }
    let mut out = String::from("edge_id,n_x,n_y,flux\n");
    for e in 0..mesh.num_edges() {
        let n = mesh.edge_normal[e];
        let _ = writeln!(
            out,
            "{e},{},{},{}",
            fmt_full(n[0]),
            fmt_full(n[1]),
            fmt_full(q[e])
        );
    }
    Ok(out)
}

/// Write rendered text to a file, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    #[test]
    fn mesh_vtk_counts_match_the_mesh() {
        let mesh = Mesh::build_uniform(Rect::unit(), 8).unwrap();
        let text = mesh_vtk(&mesh);
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains(&format!("POINTS {} double", mesh.nodes.len())));
        assert!(text.contains("CELLS 128 512"));
        assert!(text.contains("CELL_TYPES 128"));
        // one "5" line per cell
        assert_eq!(text.lines().filter(|l| *l == "5").count(), 128);
    }

    #[test]
    fn solution_vtk_carries_both_fields() {
        let mesh = Mesh::build_uniform(Rect::unit(), 2).unwrap();
        let u: Vec<f64> = (0..mesh.nodes.len()).map(|i| i as f64).collect();
        let lambda: Vec<f64> = (0..mesh.num_triangles()).map(|i| -(i as f64)).collect();
        let text = solution_vtk(&mesh, &u, &lambda).unwrap();
        assert!(text.contains(&format!("POINT_DATA {}", u.len())));
        assert!(text.contains("SCALARS u double 1"));
        assert!(text.contains(&format!("CELL_DATA {}", lambda.len())));
        assert!(text.contains("SCALARS lambda double 1"));
        // Full-precision, locale-independent serialization.
        assert!(text.contains(&format!("{:.16e}", 3.0)));
        assert!(solution_vtk(&mesh, &u[1..], &lambda).is_err());
    }

    #[test]
    fn saturation_vtk_is_cellwise() {
        let mesh = Mesh::build_uniform(Rect::unit(), 2).unwrap();
        let s = vec![0.5; mesh.num_triangles()];
        let text = saturation_vtk(&mesh, &s).unwrap();
        assert!(text.contains("SCALARS saturation double 1"));
        assert!(!text.contains("POINT_DATA"));
        assert!(saturation_vtk(&mesh, &s[1..]).is_err());
    }

    #[test]
    fn edge_csv_has_one_row_per_edge_with_unit_normals() {
        let mesh = Mesh::build_uniform(Rect::unit(), 2).unwrap();
        let q: Vec<f64> = (0..mesh.num_edges()).map(|e| e as f64 / 7.0).collect();
        let text = edge_flux_csv(&mesh, &q).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "edge_id,n_x,n_y,flux");
        assert_eq!(lines.len(), 1 + mesh.num_edges());
        for (e, line) in lines[1..].iter().enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), 4);
            assert_eq!(cells[0], e.to_string());
            let nx: f64 = cells[1].parse().unwrap();
            let ny: f64 = cells[2].parse().unwrap();
            assert!((nx * nx + ny * ny - 1.0).abs() < 1e-14);
            let flux: f64 = cells[3].parse().unwrap();
            assert_eq!(flux, q[e], "17 significant digits round-trip exactly");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let mesh = Mesh::build_uniform(Rect::unit(), 3).unwrap();
        let s: Vec<f64> = (0..mesh.num_triangles()).map(|i| (i as f64).sin().abs()).collect();
        assert_eq!(
            saturation_vtk(&mesh, &s).unwrap(),
            saturation_vtk(&mesh, &s).unwrap()
        );
        assert_eq!(mesh_vtk(&mesh), mesh_vtk(&mesh));
    }
}
