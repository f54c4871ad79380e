//! Fracture geometry files, legacy VTK output and small file helpers.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{FineMesh, FractureSet, Polyline};

/// Parses one polyline per line: `x1 y1 x2 y2 [x3 y3 ...]`. Text after `#`
/// is ignored, as are blank lines.
pub fn parse_fractures(text: &str, origin: &Path) -> Result<Vec<Polyline>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: no + 1,
            msg,
        };
        let nums = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad number {t:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() < 4 || nums.len() % 2 != 0 {
            return Err(err(format!("expected an even count of at least 4 coordinates, got {}", nums.len())));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite coordinate".into()));
        }
        out.push(nums.chunks(2).map(|c| [c[0], c[1]]).collect());
    }
    Ok(out)
}

pub fn read_fractures(path: &Path) -> Result<Vec<Polyline>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fractures(&text, path)
}

pub fn format_fractures(polylines: &[Polyline], header: &str) -> String {
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "# {line}");
    }
    for pl in polylines {
        let coords: Vec<String> = pl.iter().flat_map(|p| [format!("{:.12}", p[0]), format!("{:.12}", p[1])]).collect();
        let _ = writeln!(s, "{}", coords.join(" "));
    }
    s
}

pub fn write_fractures(path: &Path, polylines: &[Polyline], header: &str) -> Result<()> {
    write_atomic(path, format_fractures(polylines, header).as_bytes())
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn push_scalars(s: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(s, "{v:.10e}");
    }
}

/// Triangle mesh with per-cell and per-vertex scalar fields.
pub fn mesh_vtk(mesh: &FineMesh, cell_fields: &[(&str, &[f64])], point_fields: &[(&str, &[f64])]) -> Result<String> {
    for (name, f) in cell_fields {
        if f.len() != mesh.n_cells() {
            return Err(Error::invalid(format!("cell field {name} has {} values", f.len())));
        }
    }
    for (name, f) in point_fields {
        if f.len() != mesh.n_vertices() {
            return Err(Error::invalid(format!("point field {name} has {} values", f.len())));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nporoelastic fine grid\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), 4 * mesh.n_cells());
    for c in mesh.cells() {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for _ in 0..mesh.n_cells() {
        s.push_str("5\n");
    }
    if !cell_fields.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
        for (name, f) in cell_fields {
            push_scalars(&mut s, name, f);
        }
    }
    if !point_fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_vertices());
        for (name, f) in point_fields {
            push_scalars(&mut s, name, f);
        }
    }
    Ok(s)
}

/// Fracture segments as VTK line cells with per-segment fields.
pub fn fractures_vtk(fr: &FractureSet, fields: &[(&str, &[f64])]) -> Result<String> {
    let n = fr.n_segments();
    for (name, f) in fields {
        if f.len() != n {
            return Err(Error::invalid(format!("segment field {name} has {} values", f.len())));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nfracture segments\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", 2 * n);
    for seg in &fr.segments {
        let _ = writeln!(s, "{} {} 0\n{} {} 0", seg.a[0], seg.a[1], seg.b[0], seg.b[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", n, 3 * n);
    for l in 0..n {
        let _ = writeln!(s, "2 {} {}", 2 * l, 2 * l + 1);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        s.push_str("3\n");
    }
    let network: Vec<f64> = fr.segments.iter().map(|seg| seg.network as f64).collect();
    let _ = writeln!(s, "CELL_DATA {n}");
    push_scalars(&mut s, "network", &network);
    for (name, f) in fields {
        push_scalars(&mut s, name, f);
    }
    Ok(s)
}
