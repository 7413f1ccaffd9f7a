//! Conforming triangulations of the square plate, hole meshes for synthetic
//! forward solves, adaptive refinement, and nodal field plumbing.
//!
//! Triangles are stored counterclockwise with the bisection (refinement) edge
//! as the first two vertices; structured meshes put the cell diagonal there so
//! newest-vertex bisection starts from a compatible configuration.

mod interp;
mod kvmesh;
mod refine;
mod trace;

pub use interp::{interpolate_nodal, Interpolated, Locator};
pub use kvmesh::{read_mesh, write_mesh};
pub use refine::{refine, Prolongation};
pub use trace::{arc_param, BoundaryTrace, TraceSelect, OUTER_PERIMETER};

use crate::geom::{signed_area, Point2, ShapeSpec};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {index} has non-positive area {area}")]
    Orientation { index: usize, area: f64 },
    #[error("boundary edge ({a}, {b}) of the complex carries no label")]
    UnlabeledBoundary { a: usize, b: usize },
    #[error("edge ({a}, {b}) is incident to {count} triangles")]
    NonConforming { a: usize, b: usize, count: usize },
    #[error("labeled edge ({a}, {b}) is not a boundary edge of the complex")]
    NotBoundary { a: usize, b: usize },
    #[error("cavity shape too close to the outer boundary (needs distance >= {required})")]
    ShapeTouchesBoundary { required: f64 },
    #[error("cavity shapes overlap")]
    ShapesOverlap,
    #[error("triangle removal disconnects the domain")]
    Disconnected,
    #[error("triangle removal leaves an empty mesh")]
    Empty,
    #[error("destination vertex {vertex} lies on the shared outer boundary but is not covered by the source mesh")]
    SharedBoundaryNotCovered { vertex: usize },
    #[error("field has {got} values for {want} vertices x {ncomp} components")]
    FieldSize { got: usize, want: usize, ncomp: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Boundary edge label. `SigmaN` carries traction data, `SigmaD` is clamped,
/// `CavityWall` is the traction-free staircase of a hole mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryLabel {
    SigmaN,
    SigmaD,
    CavityWall,
}

impl BoundaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryLabel::SigmaN => "SIGMA_N",
            BoundaryLabel::SigmaD => "SIGMA_D",
            BoundaryLabel::CavityWall => "CAVITY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SIGMA_N" => Some(BoundaryLabel::SigmaN),
            "SIGMA_D" => Some(BoundaryLabel::SigmaD),
            "CAVITY" => Some(BoundaryLabel::CavityWall),
            _ => None,
        }
    }
}

/// Side of the square outer boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub label: BoundaryLabel,
}

/// Conforming triangulation with labeled boundary and refinement genealogy.
/// Immutable after construction; refinement returns a new mesh.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    vertices: Vec<Point2<T>>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    generation: Vec<u32>,
}

impl<T: Scalar> Mesh<T> {
    pub fn new(
        vertices: Vec<Point2<T>>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        generation: Vec<u32>,
    ) -> Result<Self, MeshError> {
        let mesh = Self { vertices, triangles, boundary_edges, generation };
        mesh.audit()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point2<T> {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    pub fn triangle_points(&self, t: usize) -> [Point2<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> T {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Constant gradient of the P1 basis functions on triangle `t`.
    pub fn p1_gradients(&self, t: usize) -> [Point2<T>; 3] {
        let [a, b, c] = self.triangle_points(t);
        let inv2a = T::one() / (T::two() * signed_area(a, b, c));
        [
            Point2::new((b.y - c.y) * inv2a, (c.x - b.x) * inv2a),
            Point2::new((c.y - a.y) * inv2a, (a.x - c.x) * inv2a),
            Point2::new((a.y - b.y) * inv2a, (b.x - a.x) * inv2a),
        ]
    }

    /// Map (sorted vertex pair) -> incident triangle indices.
    pub fn edge_incidence(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (ti, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                map.entry(sorted_pair(a, b)).or_default().push(ti);
            }
        }
        map
    }

    /// Vertices on SigmaD edges (SigmaD is closed, so shared corners count).
    pub fn sigma_d_vertices(&self) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        for e in &self.boundary_edges {
            if e.label == BoundaryLabel::SigmaD {
                set.insert(e.a);
                set.insert(e.b);
            }
        }
        set
    }

    /// Vertices on SigmaN edges, excluding those already claimed by SigmaD.
    pub fn sigma_n_vertices(&self) -> Vec<usize> {
        let clamped = self.sigma_d_vertices();
        let mut set = BTreeSet::new();
        for e in &self.boundary_edges {
            if e.label == BoundaryLabel::SigmaN {
                set.insert(e.a);
                set.insert(e.b);
            }
        }
        set.into_iter().filter(|v| !clamped.contains(v)).collect()
    }

    pub fn edges_with_label(&self, label: BoundaryLabel) -> Vec<&BoundaryEdge> {
        self.boundary_edges.iter().filter(|e| e.label == label).collect()
    }

    /// Structural invariants: positive areas, conformity, labeled boundary.
    pub fn audit(&self) -> Result<(), MeshError> {
        let nv = self.vertices.len();
        for (i, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::Parse {
                        line: 0,
                        message: format!("triangle {i} references vertex {v} of {nv}"),
                    });
                }
            }
            let area = self.triangle_area(i);
            if !(area > T::zero()) {
                return Err(MeshError::Orientation { index: i, area: area.to_f64_lossy() });
            }
        }
        let incidence = self.edge_incidence();
        for (&(a, b), tris) in &incidence {
            if tris.len() > 2 {
                return Err(MeshError::NonConforming { a, b, count: tris.len() });
            }
        }
        let mut labeled: BTreeSet<(usize, usize)> = BTreeSet::new();
        for e in &self.boundary_edges {
            let key = sorted_pair(e.a, e.b);
            match incidence.get(&key) {
                Some(tris) if tris.len() == 1 => {}
                Some(tris) => {
                    return Err(MeshError::NonConforming { a: e.a, b: e.b, count: tris.len() })
                }
                None => return Err(MeshError::NotBoundary { a: e.a, b: e.b }),
            }
            labeled.insert(key);
        }
        for (&(a, b), tris) in &incidence {
            if tris.len() == 1 && !labeled.contains(&(a, b)) {
                return Err(MeshError::UnlabeledBoundary { a, b });
            }
        }
        Ok(())
    }

    /// Vertices within distance `d0` of the outer boundary of the square.
    pub fn inner_band(&self, d0: T) -> Vec<usize> {
        let one = T::one();
        let eps = T::cast(1e-9);
        (0..self.num_vertices())
            .filter(|&i| {
                let p = self.vertices[i];
                let dist = (one - p.x.abs()).min(one - p.y.abs());
                dist <= d0 + eps
            })
            .collect()
    }

    /// Element-wise |grad v| for a scalar P1 field.
    pub fn gradient_magnitudes(&self, v: &NodalField<T>) -> Vec<T> {
        assert_eq!(v.ncomp, 1);
        (0..self.num_triangles())
            .map(|t| {
                let grads = self.p1_gradients(t);
                let tri = self.triangles[t];
                let mut g = Point2::new(T::zero(), T::zero());
                for k in 0..3 {
                    g = g + grads[k] * v.data[tri[k]];
                }
                g.norm()
            })
            .collect()
    }

    /// Triangles whose |grad v| is in the top `fraction` quantile; ties break
    /// toward the lower triangle index. Returns ascending indices.
    pub fn mark_by_gradient(&self, v: &NodalField<T>, fraction: T) -> Vec<usize> {
        assert!(fraction > T::zero() && fraction <= T::one());
        let grads = self.gradient_magnitudes(v);
        let nt = self.num_triangles();
        let k = (fraction.to_f64_lossy() * nt as f64).ceil() as usize;
        let k = k.min(nt);
        let mut order: Vec<usize> = (0..nt).collect();
        order.sort_by(|&i, &j| {
            grads[j].partial_cmp(&grads[i]).unwrap().then(i.cmp(&j))
        });
        let mut picked: Vec<usize> = order.into_iter().take(k).collect();
        picked.sort_unstable();
        picked
    }
}

pub(crate) fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Structured triangulation of [-1,1]^2 with n cells per side, each cell split
/// along its SW-NE diagonal. `sigma_d` lists the clamped sides; the rest of
/// the outer boundary is SigmaN.
pub fn generate_square_mesh<T: Scalar>(n: usize, sigma_d: &[Side]) -> Mesh<T> {
    assert!(n >= 1, "need at least one cell per side");
    let np = n + 1;
    let coord = |i: usize| -> T { T::cast(-1.0) + T::two() * T::cast(i as f64) / T::cast(n as f64) };
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push(Point2::new(coord(i), coord(j)));
        }
    }
    let vid = |i: usize, j: usize| j * np + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let sw = vid(i, j);
            let se = vid(i + 1, j);
            let ne = vid(i + 1, j + 1);
            let nw = vid(i, j + 1);
            // diagonal (sw, ne) first so it is the refinement edge
            triangles.push([ne, sw, se]);
            triangles.push([sw, ne, nw]);
        }
    }
    let label_for = |side: Side| {
        if sigma_d.contains(&side) {
            BoundaryLabel::SigmaD
        } else {
            BoundaryLabel::SigmaN
        }
    };
    let mut boundary_edges = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary_edges.push(BoundaryEdge { a: vid(i, 0), b: vid(i + 1, 0), label: label_for(Side::Bottom) });
        boundary_edges.push(BoundaryEdge { a: vid(n, i), b: vid(n, i + 1), label: label_for(Side::Right) });
        boundary_edges.push(BoundaryEdge { a: vid(i, n), b: vid(i + 1, n), label: label_for(Side::Top) });
        boundary_edges.push(BoundaryEdge { a: vid(0, i), b: vid(0, i + 1), label: label_for(Side::Left) });
    }
    let generation = vec![0; triangles.len()];
    Mesh { vertices, triangles, boundary_edges, generation }
}

/// Square mesh with every triangle whose centroid falls inside a cavity shape
/// removed; the exposed staircase is labeled CavityWall.
///
/// `d0` is the protected band width: shapes must keep distance >= 2 d0 from
/// the outer boundary.
pub fn generate_hole_mesh<T: Scalar>(
    n: usize,
    shapes: &[ShapeSpec<T>],
    sigma_d: &[Side],
    d0: T,
) -> Result<Mesh<T>, MeshError> {
    let full = generate_square_mesh::<T>(n, sigma_d);
    if shapes.is_empty() {
        return Ok(full);
    }
    let margin = T::two() * d0;
    for shape in shapes {
        let bb = shape.bbox();
        let reach = bb[0].abs().max(bb[1].abs()).max(bb[2].abs()).max(bb[3].abs());
        if reach > T::one() - margin {
            return Err(MeshError::ShapeTouchesBoundary { required: margin.to_f64_lossy() });
        }
    }
    // pairwise disjointness probed on a sampling grid
    let probe = 256usize;
    for gj in 0..probe {
        for gi in 0..probe {
            let p = Point2::new(
                T::cast(-1.0 + 2.0 * (gi as f64 + 0.5) / probe as f64),
                T::cast(-1.0 + 2.0 * (gj as f64 + 0.5) / probe as f64),
            );
            let hits = shapes.iter().filter(|s| s.contains(p)).count();
            if hits > 1 {
                return Err(MeshError::ShapesOverlap);
            }
        }
    }

    let keep: Vec<bool> = (0..full.num_triangles())
        .map(|t| {
            let [a, b, c] = full.triangle_points(t);
            let centroid = (a + b + c) * (T::one() / T::cast(3.0));
            !shapes.iter().any(|s| s.contains(centroid))
        })
        .collect();
    if keep.iter().all(|&k| !k) {
        return Err(MeshError::Empty);
    }

    // connectivity of the retained complex via shared edges
    let incidence = full.edge_incidence();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); full.num_triangles()];
    for tris in incidence.values() {
        if tris.len() == 2 && keep[tris[0]] && keep[tris[1]] {
            adj[tris[0]].push(tris[1]);
            adj[tris[1]].push(tris[0]);
        }
    }
    let start = keep.iter().position(|&k| k).unwrap();
    let mut seen = vec![false; full.num_triangles()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(t) = queue.pop_front() {
        for &u in &adj[t] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    if (0..full.num_triangles()).any(|t| keep[t] && !seen[t]) {
        return Err(MeshError::Disconnected);
    }

    // compact vertices and rebuild
    let mut vertex_map = vec![usize::MAX; full.num_vertices()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut generation = Vec::new();
    for (t, tri) in full.triangles.iter().enumerate() {
        if !keep[t] {
            continue;
        }
        let mut new_tri = [0usize; 3];
        for (slot, &v) in new_tri.iter_mut().zip(tri) {
            if vertex_map[v] == usize::MAX {
                vertex_map[v] = vertices.len();
                vertices.push(full.vertices[v]);
            }
            *slot = vertex_map[v];
        }
        triangles.push(new_tri);
        generation.push(full.generation[t]);
    }

    // boundary edges: retained outer labels plus the exposed staircase
    let mut outer: BTreeMap<(usize, usize), BoundaryLabel> = BTreeMap::new();
    for e in &full.boundary_edges {
        outer.insert(sorted_pair(e.a, e.b), e.label);
    }
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut orig: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for (t, tri) in full.triangles.iter().enumerate() {
        if !keep[t] {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = sorted_pair(vertex_map[a], vertex_map[b]);
            *count.entry(key).or_insert(0) += 1;
            orig.insert(key, sorted_pair(a, b));
        }
    }
    let mut boundary_edges = Vec::new();
    for (&(a, b), &c) in &count {
        if c == 1 {
            let label = outer
                .get(&orig[&(a, b)])
                .copied()
                .unwrap_or(BoundaryLabel::CavityWall);
            boundary_edges.push(BoundaryEdge { a, b, label });
        }
    }

    Mesh::new(vertices, triangles, boundary_edges, generation)
}

/// Nodal values on a mesh: one scalar (`ncomp = 1`) or one 2-vector
/// (`ncomp = 2`) per vertex, stored interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField<T> {
    pub ncomp: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> NodalField<T> {
    pub fn scalar(data: Vec<T>) -> Self {
        Self { ncomp: 1, data }
    }

    pub fn vector(data: Vec<T>) -> Self {
        assert_eq!(data.len() % 2, 0);
        Self { ncomp: 2, data }
    }

    pub fn zeros(ncomp: usize, num_vertices: usize) -> Self {
        Self { ncomp, data: vec![T::zero(); ncomp * num_vertices] }
    }

    pub fn num_vertices(&self) -> usize {
        self.data.len() / self.ncomp
    }

    pub fn check_on<M: Scalar>(&self, mesh: &Mesh<M>) -> Result<(), MeshError> {
        if self.data.len() != self.ncomp * mesh.num_vertices() {
            return Err(MeshError::FieldSize {
                got: self.data.len(),
                want: mesh.num_vertices(),
                ncomp: self.ncomp,
            });
        }
        Ok(())
    }

    pub fn at(&self, vertex: usize) -> &[T] {
        &self.data[vertex * self.ncomp..(vertex + 1) * self.ncomp]
    }

    pub fn vec2(&self, vertex: usize) -> [T; 2] {
        debug_assert_eq!(self.ncomp, 2);
        [self.data[2 * vertex], self.data[2 * vertex + 1]]
    }
}

#[cfg(test)]
mod tests;
