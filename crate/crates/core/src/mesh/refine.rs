//! Newest-vertex bisection with recursive conformity closure.

use super::{sorted_pair, BoundaryEdge, Mesh, NodalField};
use crate::scalar::Scalar;
use std::collections::{BTreeMap, BTreeSet};

/// Exact transfer of P1 nodal fields from a mesh to its refinement: old
/// vertices keep their index, each added vertex is the midpoint of an old
/// edge and receives the endpoint average.
#[derive(Clone, Debug)]
pub struct Prolongation {
    pub old_vertex_count: usize,
    /// Parent endpoints of added vertex `old_vertex_count + k`.
    pub added: Vec<(usize, usize)>,
}

impl Prolongation {
    pub fn identity(old_vertex_count: usize) -> Self {
        Self { old_vertex_count, added: Vec::new() }
    }

    pub fn new_vertex_count(&self) -> usize {
        self.old_vertex_count + self.added.len()
    }

    pub fn apply<T: Scalar>(&self, field: &NodalField<T>) -> NodalField<T> {
        assert_eq!(field.num_vertices(), self.old_vertex_count);
        let nc = field.ncomp;
        let mut data = Vec::with_capacity(nc * self.new_vertex_count());
        data.extend_from_slice(&field.data);
        for &(a, b) in &self.added {
            for c in 0..nc {
                data.push((field.data[a * nc + c] + field.data[b * nc + c]) * T::half());
            }
        }
        NodalField { ncomp: nc, data }
    }
}

/// Bisect the marked triangles through their refinement edges and close the
/// mesh so no hanging nodes remain. Old vertices persist with their indices
/// and coordinates.
pub fn refine<T: Scalar>(mesh: &Mesh<T>, marked: &BTreeSet<usize>) -> (Mesh<T>, Prolongation) {
    if marked.is_empty() {
        return (mesh.clone(), Prolongation::identity(mesh.num_vertices()));
    }

    // closure on the set of edges to bisect: whenever any edge of a triangle
    // is split, its refinement edge must be split too
    let mut split: BTreeSet<(usize, usize)> = marked
        .iter()
        .map(|&t| {
            let tri = mesh.triangles()[t];
            sorted_pair(tri[0], tri[1])
        })
        .collect();
    loop {
        let mut grown = false;
        for tri in mesh.triangles() {
            let ref_edge = sorted_pair(tri[0], tri[1]);
            if split.contains(&ref_edge) {
                continue;
            }
            let touches = (0..3)
                .any(|k| split.contains(&sorted_pair(tri[k], tri[(k + 1) % 3])));
            if touches {
                split.insert(ref_edge);
                grown = true;
            }
        }
        if !grown {
            break;
        }
    }

    let old_nv = mesh.num_vertices();
    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut added = Vec::with_capacity(split.len());
    for &(a, b) in &split {
        let m = (mesh.vertex(a) + mesh.vertex(b)) * T::half();
        midpoint.insert((a, b), vertices.len());
        vertices.push(m);
        added.push((a, b));
    }

    let mut triangles = Vec::with_capacity(mesh.num_triangles() + 2 * split.len());
    let mut generation = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let gen = mesh.generation()[t];
        bisect_into(tri, gen, &midpoint, &mut triangles, &mut generation);
    }

    let mut boundary_edges = Vec::with_capacity(mesh.boundary_edges().len() + split.len());
    for e in mesh.boundary_edges() {
        match midpoint.get(&sorted_pair(e.a, e.b)) {
            Some(&m) => {
                boundary_edges.push(BoundaryEdge { a: e.a, b: m, label: e.label });
                boundary_edges.push(BoundaryEdge { a: m, b: e.b, label: e.label });
            }
            None => boundary_edges.push(*e),
        }
    }

    let refined = Mesh { vertices, triangles, boundary_edges, generation };
    debug_assert!(refined.audit().is_ok());
    (refined, Prolongation { old_vertex_count: old_nv, added })
}

/// Children of (v0, v1, v2) with refinement edge (v0, v1) and midpoint m:
/// (v2, v0, m) and (v1, v2, m); both counterclockwise, both with the parent
/// edge first so a pending split of that edge recurses one level deeper.
fn bisect_into(
    tri: &[usize; 3],
    gen: u32,
    midpoint: &BTreeMap<(usize, usize), usize>,
    triangles: &mut Vec<[usize; 3]>,
    generation: &mut Vec<u32>,
) {
    let ref_edge = sorted_pair(tri[0], tri[1]);
    match midpoint.get(&ref_edge) {
        None => {
            triangles.push(*tri);
            generation.push(gen);
        }
        Some(&m) => {
            for child in [[tri[2], tri[0], m], [tri[1], tri[2], m]] {
                bisect_into(&child, gen + 1, midpoint, triangles, generation);
            }
        }
    }
}
