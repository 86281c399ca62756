//! OBJ meshes, CSV curve tables and SVG polylines.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use isoforge::surface::SampledSurface;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub faces: usize,
    /// Euler characteristic of the complex spanned by the faces.
    pub euler: i64,
    pub wrap_u: bool,
    pub weld_v: bool,
}

/// Quad faces over the grid, as 0-based vertex indices `j * nu + i`.
///
/// `wrap_u` joins the last column to the first; `weld_v` maps the last row onto the first.
pub fn quad_faces(nu: usize, nv: usize, wrap_u: bool, weld_v: bool) -> Vec<[usize; 4]> {
    let cols = if wrap_u { nu } else { nu - 1 };
    let row = |j: usize| if weld_v && j == nv - 1 { 0 } else { j };
    let mut faces = Vec::with_capacity(cols * (nv - 1));
    for j in 0..nv - 1 {
        for i in 0..cols {
            let i1 = (i + 1) % nu;
            let (a, b) = (row(j) * nu, row(j + 1) * nu);
            faces.push([a + i, a + i1, b + i1, b + i]);
        }
    }
    faces
}

pub fn euler_characteristic(faces: &[[usize; 4]]) -> i64 {
    let mut verts = HashSet::new();
    let mut edges = HashSet::new();
    for f in faces {
        for k in 0..4 {
            let (a, b) = (f[k], f[(k + 1) % 4]);
            verts.insert(a);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    verts.len() as i64 - edges.len() as i64 + faces.len() as i64
}

/// Write all `nu * nv` vertices with normals; faces are wound so that their
/// normals agree with the surface normal.
pub fn write_obj(path: &Path, s: &SampledSurface, wrap_u: bool, weld_v: bool) -> Result<MeshStats> {
    let (nu, nv) = (s.nu(), s.nv());
    let mut faces = quad_faces(nu, nv, wrap_u, weld_v);
    let (fu, fv, n) = (s.fu[0][0], s.fv[0][0], s.normal[0][0]);
    if fu.cross(&fv).dot(&n) < 0.0 {
        for f in &mut faces {
            f.reverse();
        }
    }
    let mut out = String::new();
    writeln!(out, "# isoforge surface: {nu} x {nv} grid").unwrap();
    for p in s.points.iter().flatten() {
        writeln!(out, "v {:.12e} {:.12e} {:.12e}", p.x, p.y, p.z).unwrap();
    }
    for p in s.normal.iter().flatten() {
        writeln!(out, "vn {:.12e} {:.12e} {:.12e}", p.x, p.y, p.z).unwrap();
    }
    for f in &faces {
        let [a, b, c, d] = f.map(|k| k + 1);
        writeln!(out, "f {a}//{a} {b}//{b} {c}//{c} {d}//{d}").unwrap();
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(MeshStats { vertices: nu * nv, faces: faces.len(), euler: euler_characteristic(&faces), wrap_u, weld_v })
}

/// Write a CSV table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:.12e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Render planar polylines into a square SVG, preserving aspect ratio.
pub fn write_svg(path: &Path, curves: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let pts = curves.iter().flat_map(|(_, c)| c.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let size = 800.0;
    let margin = 20.0;
    let scale = (size - 2.0 * margin) / span;
    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (name, c) in curves {
        let coords: Vec<String> = c
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.3},{:.3}", margin + (x - x0) * scale, size - margin - (y - y0) * scale))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"><title>{name}</title></polyline>"#,
            coords.join(" ")
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Unused vertices are allowed; every face index must be in range.
#[cfg(test)]
fn faces_valid(faces: &[[usize; 4]], vertices: usize) -> bool {
    faces.iter().flatten().all(|&k| k < vertices)
}
