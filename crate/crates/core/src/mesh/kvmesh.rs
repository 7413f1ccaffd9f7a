//! KVMESH ASCII format.
//!
//! ```text
//! KVMESH 1
//! <nv> <nt> <nb>
//! x y          (nv lines, full precision)
//! i j k        (nt lines, 0-based, counterclockwise)
//! i j LABEL    (nb lines, LABEL in {SIGMA_N, SIGMA_D, CAVITY})
//! ```
//!
//! Whitespace separated; `#` starts a comment.

use super::{BoundaryEdge, BoundaryLabel, Mesh, MeshError};
use crate::geom::Point2;
use crate::scalar::Scalar;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

pub fn write_mesh<T: Scalar>(mesh: &Mesh<T>, path: &Path) -> Result<(), MeshError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "KVMESH 1")?;
    writeln!(
        w,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges().len()
    )?;
    for p in mesh.vertices() {
        writeln!(w, "{} {}", p.x, p.y)?;
    }
    for tri in mesh.triangles() {
        writeln!(w, "{} {} {}", tri[0], tri[1], tri[2])?;
    }
    for e in mesh.boundary_edges() {
        writeln!(w, "{} {} {}", e.a, e.b, e.label.as_str())?;
    }
    Ok(())
}

pub fn read_mesh<T: Scalar>(path: &Path) -> Result<Mesh<T>, MeshError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut tokens = TokenLines::new(reader);

    let header = tokens.next_line()?;
    if header.fields.len() != 2 || header.fields[0] != "KVMESH" || header.fields[1] != "1" {
        return Err(MeshError::Parse {
            line: header.number,
            message: "expected header `KVMESH 1`".into(),
        });
    }
    let counts = tokens.next_line()?;
    let [nv, nt, nb] = parse_counts(&counts)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = tokens.next_line()?;
        if line.fields.len() != 2 {
            return Err(line.error("expected `x y`"));
        }
        let x = line.parse_float(0)?;
        let y = line.parse_float(1)?;
        vertices.push(Point2::new(T::cast(x), T::cast(y)));
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let line = tokens.next_line()?;
        if line.fields.len() != 3 {
            return Err(line.error("expected `i j k`"));
        }
        let tri = [
            line.parse_index(0, nv)?,
            line.parse_index(1, nv)?,
            line.parse_index(2, nv)?,
        ];
        triangles.push(tri);
    }
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let line = tokens.next_line()?;
        if line.fields.len() != 3 {
            return Err(line.error("expected `i j LABEL`"));
        }
        let a = line.parse_index(0, nv)?;
        let b = line.parse_index(1, nv)?;
        let label = BoundaryLabel::parse(&line.fields[2])
            .ok_or_else(|| line.error("unknown boundary label"))?;
        boundary_edges.push(BoundaryEdge { a, b, label });
    }

    let generation = vec![0; triangles.len()];
    Mesh::new(vertices, triangles, boundary_edges, generation)
}

struct Line {
    number: usize,
    fields: Vec<String>,
}

impl Line {
    fn error(&self, message: &str) -> MeshError {
        MeshError::Parse { line: self.number, message: message.into() }
    }

    fn parse_float(&self, idx: usize) -> Result<f64, MeshError> {
        self.fields[idx]
            .parse::<f64>()
            .map_err(|e| self.error(&format!("bad number `{}`: {e}", self.fields[idx])))
    }

    fn parse_index(&self, idx: usize, bound: usize) -> Result<usize, MeshError> {
        let v = self.fields[idx]
            .parse::<usize>()
            .map_err(|e| self.error(&format!("bad index `{}`: {e}", self.fields[idx])))?;
        if v >= bound {
            return Err(self.error(&format!("index {v} out of range (< {bound})")));
        }
        Ok(v)
    }
}

struct TokenLines<R> {
    reader: R,
    number: usize,
}

impl<R: BufRead> TokenLines<R> {
    fn new(reader: R) -> Self {
        Self { reader, number: 0 }
    }

    /// Next line with content after comment stripping.
    fn next_line(&mut self) -> Result<Line, MeshError> {
        loop {
            let mut raw = String::new();
            let read = self.reader.read_line(&mut raw)?;
            if read == 0 {
                return Err(MeshError::Parse {
                    line: self.number + 1,
                    message: "unexpected end of file".into(),
                });
            }
            self.number += 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            return Ok(Line {
                number: self.number,
                fields: content.split_whitespace().map(str::to_string).collect(),
            });
        }
    }
}

fn parse_counts(line: &Line) -> Result<[usize; 3], MeshError> {
    if line.fields.len() != 3 {
        return Err(line.error("expected `<nv> <nt> <nb>`"));
    }
    let mut out = [0usize; 3];
    for (slot, field) in out.iter_mut().zip(&line.fields) {
        *slot = field
            .parse::<usize>()
            .map_err(|e| line.error(&format!("bad count `{field}`: {e}")))?;
    }
    Ok(out)
}
