//! Artifact export and re-import: history CSV, measurement traces, nodal
//! fields, legacy VTK, PGM/SVG rasters, and run snapshots.
//!
//! The io layer is concrete f64: it serializes with shortest round-trip
//! formatting so re-reading reproduces exact bits.

use crate::elasticity::LinearTraction;
use crate::geom::ShapeSpec;
use crate::inversion::{HistoryRow, RunSnapshot};
use crate::functional::EnergyBreakdown;
use crate::mesh::{BoundaryTrace, Mesh, NodalField};
use crate::synthdata::Measurement;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: line {line}: {message}")]
    Format { path: String, line: usize, message: String },
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> ExportError {
    ExportError::Format {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// history CSV

pub fn write_history(rows: &[HistoryRow<f64>], path: &Path) -> Result<(), ExportError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_history_header(&mut w)?;
    for row in rows {
        write_history_row(&mut w, row)?;
    }
    Ok(())
}

pub fn write_history_header<W: Write>(w: &mut W) -> Result<(), ExportError> {
    writeln!(w, "n,tau,step_norm,jn,jd,jnd,mm_grad,mm_pot,total,accepted")?;
    Ok(())
}

pub fn write_history_row<W: Write>(w: &mut W, row: &HistoryRow<f64>) -> Result<(), ExportError> {
    let e = &row.energy;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{}",
        row.n, row.tau, row.step_norm, e.jn, e.jd, e.jnd, e.mm_grad, e.mm_pot, e.total, row.accepted
    )?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow<f64>>, ExportError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(format_err(path, i + 1, "expected 10 columns"));
        }
        let num = |k: usize| -> Result<f64, ExportError> {
            fields[k]
                .parse()
                .map_err(|e| format_err(path, i + 1, format!("bad number `{}`: {e}", fields[k])))
        };
        rows.push(HistoryRow {
            n: fields[0]
                .parse()
                .map_err(|e| format_err(path, i + 1, format!("bad index: {e}")))?,
            tau: num(1)?,
            step_norm: num(2)?,
            energy: EnergyBreakdown {
                jn: num(3)?,
                jd: num(4)?,
                jnd: num(5)?,
                mm_grad: num(6)?,
                mm_pot: num(7)?,
                total: num(8)?,
            },
            accepted: fields[9].trim() == "true",
            rejections: 0,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// measurement trace CSV

fn side_of_arc(s: f64) -> &'static str {
    if s <= 2.0 {
        "bottom"
    } else if s <= 4.0 {
        "right"
    } else if s <= 6.0 {
        "top"
    } else {
        "left"
    }
}

fn traction_expression(g: &LinearTraction<f64>) -> String {
    fn component(c: &[f64; 3]) -> String {
        let mut out = format!("{}", c[0]);
        for (coef, var) in [(c[1], "x"), (c[2], "y")] {
            let sign = if coef.is_sign_negative() { '-' } else { '+' };
            out.push_str(&format!(" {sign} {}*{var}", coef.abs()));
        }
        out
    }
    format!("({}, {})", component(&g.coeffs[0]), component(&g.coeffs[1]))
}

/// Trace CSV: header comments carry the load, seed, amplitude, and reported
/// level; rows are `label_side,arclength,fx,fy` ordered by arc length.
pub fn write_measurement(
    m: &Measurement<f64>,
    seed: u64,
    amplitude: f64,
    path: &Path,
) -> Result<(), ExportError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# kv2d-measurement 1")?;
    writeln!(w, "# load = {}", traction_expression(&m.g))?;
    writeln!(w, "# seed = {seed}")?;
    writeln!(w, "# amplitude = {amplitude}")?;
    writeln!(w, "# reported_level = {}", m.noise_level_reported)?;
    writeln!(w, "label_side,arclength,fx,fy")?;
    for &(s, val) in &m.data.samples {
        writeln!(w, "{},{},{},{}", side_of_arc(s), s, val[0], val[1])?;
    }
    Ok(())
}

pub fn read_measurement(path: &Path) -> Result<Measurement<f64>, ExportError> {
    let text = std::fs::read_to_string(path)?;
    let mut load: Option<LinearTraction<f64>> = None;
    let mut level = 0.0f64;
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(expr) = comment.strip_prefix("load =") {
                load = Some(LinearTraction::parse(expr.trim()).map_err(|e| {
                    format_err(path, i + 1, format!("bad load expression: {e}"))
                })?);
            } else if let Some(value) = comment.strip_prefix("reported_level =") {
                level = value.trim().parse().map_err(|e| {
                    format_err(path, i + 1, format!("bad reported_level: {e}"))
                })?;
            }
            continue;
        }
        if !saw_header {
            if line != "label_side,arclength,fx,fy" {
                return Err(format_err(path, i + 1, "expected trace column header"));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(format_err(path, i + 1, "expected 4 columns"));
        }
        let parse = |k: usize| -> Result<f64, ExportError> {
            fields[k]
                .parse()
                .map_err(|e| format_err(path, i + 1, format!("bad number `{}`: {e}", fields[k])))
        };
        samples.push((parse(1)?, [parse(2)?, parse(3)?]));
    }
    let load = load.ok_or_else(|| format_err(path, 1, "missing `# load = ...` header"))?;
    if samples.is_empty() {
        return Err(format_err(path, 1, "trace has no samples"));
    }
    Ok(Measurement {
        g: load,
        data: BoundaryTrace { ncomp: 2, samples },
        noise_level_reported: level,
    })
}

// ---------------------------------------------------------------------------
// nodal field CSV

/// Field CSV: `# mesh = <file>` names the companion KVMESH file, one row of
/// `ncomp` values per vertex.
pub fn write_field(
    field: &NodalField<f64>,
    mesh_file: &str,
    path: &Path,
) -> Result<(), ExportError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# kv2d-field 1")?;
    writeln!(w, "# mesh = {mesh_file}")?;
    writeln!(w, "# ncomp = {}", field.ncomp)?;
    for vertex in 0..field.num_vertices() {
        let vals = field.at(vertex);
        let row: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(NodalField<f64>, Option<String>), ExportError> {
    let text = std::fs::read_to_string(path)?;
    let mut mesh_file = None;
    let mut ncomp = 1usize;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(name) = comment.strip_prefix("mesh =") {
                mesh_file = Some(name.trim().to_string());
            } else if let Some(value) = comment.strip_prefix("ncomp =") {
                ncomp = value.trim().parse().map_err(|e| {
                    format_err(path, i + 1, format!("bad ncomp: {e}"))
                })?;
            }
            continue;
        }
        for field in line.split(',') {
            data.push(field.trim().parse::<f64>().map_err(|e| {
                format_err(path, i + 1, format!("bad number `{field}`: {e}"))
            })?);
        }
    }
    if ncomp == 0 || data.len() % ncomp != 0 {
        return Err(format_err(path, 1, "value count not a multiple of ncomp"));
    }
    Ok((NodalField { ncomp, data }, mesh_file))
}

// ---------------------------------------------------------------------------
// legacy VTK

/// Legacy ASCII VTK unstructured grid with one point field (scalar or
/// 2-vector padded to 3 components).
pub fn write_vtk(
    mesh: &Mesh<f64>,
    field: Option<(&str, &NodalField<f64>)>,
    path: &Path,
) -> Result<(), ExportError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "kv2d export")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", p.x, p.y)?;
    }
    let nt = mesh.num_triangles();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for tri in mesh.triangles() {
        writeln!(w, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    if let Some((name, field)) = field {
        writeln!(w, "POINT_DATA {}", mesh.num_vertices())?;
        match field.ncomp {
            1 => {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in &field.data {
                    writeln!(w, "{v}")?;
                }
            }
            _ => {
                writeln!(w, "VECTORS {name} double")?;
                for vertex in 0..field.num_vertices() {
                    let vals = field.at(vertex);
                    writeln!(w, "{} {} 0", vals[0], vals[1])?;
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rasters

pub const RASTER_SIZE: usize = 512;

/// Grayscale P2 PGM of a scalar field on [-1,1]^2, nearest-triangle sampling;
/// uncovered pixels (holes) render black.
pub fn write_pgm(mesh: &Mesh<f64>, v: &NodalField<f64>, path: &Path) -> Result<(), ExportError> {
    assert_eq!(v.ncomp, 1);
    let locator = crate::mesh::Locator::new(mesh);
    let n = RASTER_SIZE;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "P2")?;
    writeln!(w, "{n} {n}")?;
    writeln!(w, "255")?;
    for row in 0..n {
        let y = 1.0 - 2.0 * (row as f64 + 0.5) / n as f64;
        let mut line = String::with_capacity(4 * n);
        for col in 0..n {
            let x = -1.0 + 2.0 * (col as f64 + 0.5) / n as f64;
            let value = locator
                .evaluate(v, crate::geom::Point2::new(x, y))
                .map_or(0.0, |vals| vals[0]);
            let gray = (value.clamp(0.0, 1.0) * 255.0).round() as u8;
            if col > 0 {
                line.push(' ');
            }
            line.push_str(&gray.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_pgm_dims(path: &Path) -> Result<(usize, usize), ExportError> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let magic = lines
        .next()
        .transpose()?
        .ok_or_else(|| format_err(path, 1, "empty file"))?;
    if magic.trim() != "P2" {
        return Err(format_err(path, 1, "expected P2 magic"));
    }
    let dims = lines
        .next()
        .transpose()?
        .ok_or_else(|| format_err(path, 2, "missing dimensions"))?;
    let mut parts = dims.split_whitespace();
    let w = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(path, 2, "bad width"))?;
    let h = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(path, 2, "bad height"))?;
    Ok((w, h))
}

/// Level-set segments of {v = threshold}: per triangle, edge crossings joined
/// into one segment (standard two-point case only; flat triangles skipped).
pub fn contour_segments(
    mesh: &Mesh<f64>,
    v: &NodalField<f64>,
    threshold: f64,
) -> Vec<[crate::geom::Point2<f64>; 2]> {
    let mut segments = Vec::new();
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let pts = mesh.triangle_points(t);
        let mut crossings = Vec::new();
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let (va, vb) = (v.data[a] - threshold, v.data[b] - threshold);
            if (va < 0.0 && vb >= 0.0) || (vb < 0.0 && va >= 0.0) {
                let w = va / (va - vb);
                let pa = pts[k];
                let pb = pts[(k + 1) % 3];
                crossings.push(pa + (pb - pa) * w);
            }
        }
        if crossings.len() == 2 {
            segments.push([crossings[0], crossings[1]]);
        }
    }
    segments
}

/// SVG overlay: the {v = 0.5} contour plus the truth outlines.
pub fn write_contour_svg(
    mesh: &Mesh<f64>,
    v: &NodalField<f64>,
    truth: &[ShapeSpec<f64>],
    path: &Path,
) -> Result<(), ExportError> {
    let n = RASTER_SIZE as f64;
    let map = |p: crate::geom::Point2<f64>| -> (f64, f64) {
        ((p.x + 1.0) * 0.5 * n, (1.0 - p.y) * 0.5 * n)
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {n} {n}" width="{n}" height="{n}">"#
    )?;
    writeln!(w, r#"<rect width="{n}" height="{n}" fill="white"/>"#)?;
    for shape in truth {
        for polyline in shape.outline(128) {
            let points: Vec<String> = polyline
                .iter()
                .map(|&p| {
                    let (x, y) = map(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            writeln!(
                w,
                r#"<polyline points="{}" fill="none" stroke="black" stroke-dasharray="6 4" stroke-width="1.5"/>"#,
                points.join(" ")
            )?;
        }
    }
    for seg in contour_segments(mesh, v, 0.5) {
        let (x1, y1) = map(seg[0]);
        let (x2, y2) = map(seg[1]);
        writeln!(
            w,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="crimson" stroke-width="2"/>"#
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// run snapshots

/// Continuation state in plain text (mesh stored separately as KVMESH).
pub fn write_snapshot(snap: &RunSnapshot<f64>, path: &Path) -> Result<(), ExportError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "KVSNAP 1")?;
    writeln!(
        w,
        "{} {} {} {} {}",
        snap.iteration, snap.tau, snap.accepted_steps, snap.rejected_steps, snap.last_step_norm
    )?;
    writeln!(w, "{} {}", snap.v.len(), snap.states.len())?;
    for value in &snap.v {
        writeln!(w, "{value}")?;
    }
    for (u_n, u_d) in &snap.states {
        for value in u_n {
            writeln!(w, "{value}")?;
        }
        for value in u_d {
            writeln!(w, "{value}")?;
        }
    }
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<RunSnapshot<f64>, ExportError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut next = |expect: &str| -> Result<(usize, &str), ExportError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| format_err(path, 0, format!("unexpected end of file ({expect})")))
    };
    let (line, header) = next("header")?;
    if header.trim() != "KVSNAP 1" {
        return Err(format_err(path, line, "expected header `KVSNAP 1`"));
    }
    let (line, meta) = next("meta")?;
    let fields: Vec<&str> = meta.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(format_err(path, line, "expected 5 meta fields"));
    }
    let iteration = fields[0]
        .parse()
        .map_err(|e| format_err(path, line, format!("bad iteration: {e}")))?;
    let tau = fields[1]
        .parse()
        .map_err(|e| format_err(path, line, format!("bad tau: {e}")))?;
    let accepted_steps = fields[2]
        .parse()
        .map_err(|e| format_err(path, line, format!("bad accepted count: {e}")))?;
    let rejected_steps = fields[3]
        .parse()
        .map_err(|e| format_err(path, line, format!("bad rejected count: {e}")))?;
    let last_step_norm = fields[4]
        .parse()
        .map_err(|e| format_err(path, line, format!("bad step norm: {e}")))?;
    let (line, counts) = next("counts")?;
    let fields: Vec<&str> = counts.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(format_err(path, line, "expected `<nv> <n_meas>`"));
    }
    let nv: usize = fields[0]
        .parse()
        .map_err(|e| format_err(path, line, format!("bad vertex count: {e}")))?;
    let n_meas: usize = fields[1]
        .parse()
        .map_err(|e| format_err(path, line, format!("bad measurement count: {e}")))?;
    let mut read_block = |len: usize| -> Result<Vec<f64>, ExportError> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let (line, value) = next("value")?;
            out.push(
                value
                    .trim()
                    .parse()
                    .map_err(|e| format_err(path, line, format!("bad value: {e}")))?,
            );
        }
        Ok(out)
    };
    let v = read_block(nv)?;
    let mut states = Vec::with_capacity(n_meas);
    for _ in 0..n_meas {
        let u_n = read_block(2 * nv)?;
        let u_d = read_block(2 * nv)?;
        states.push((u_n, u_d));
    }
    Ok(RunSnapshot {
        iteration,
        tau,
        accepted_steps,
        rejected_steps,
        last_step_norm,
        v,
        states,
    })
}
