//! Boundary traces: nodal values ordered by arc length along the outer
//! boundary of the square, counterclockwise from the corner (-1, -1).

use super::{BoundaryLabel, Mesh, NodalField};
use crate::geom::Point2;
use crate::scalar::Scalar;

/// Perimeter of the outer square boundary.
pub const OUTER_PERIMETER: f64 = 8.0;

/// Which labeled edges a trace covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceSelect {
    Label(BoundaryLabel),
    /// SigmaN and SigmaD together: the whole outer boundary.
    Outer,
}

impl TraceSelect {
    fn matches(self, label: BoundaryLabel) -> bool {
        match self {
            TraceSelect::Label(l) => l == label,
            TraceSelect::Outer => label != BoundaryLabel::CavityWall,
        }
    }
}

/// Arc-length parameter of a point on the outer boundary, counterclockwise
/// from (-1, -1): bottom [0, 2], right [2, 4], top [4, 6], left [6, 8].
/// Returns None off the boundary.
pub fn arc_param<T: Scalar>(p: Point2<T>) -> Option<T> {
    let one = T::one();
    let eps = T::cast(1e-9);
    if (p.y + one).abs() <= eps {
        Some(p.x + one)
    } else if (p.x - one).abs() <= eps {
        Some(T::two() + p.y + one)
    } else if (p.y - one).abs() <= eps {
        Some(T::cast(4.0) + one - p.x)
    } else if (p.x + one).abs() <= eps {
        Some(T::cast(6.0) + one - p.y)
    } else {
        None
    }
}

/// Piecewise-linear function of arc length: samples sorted by parameter.
/// Scalar traces store their value in component 0.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace<T> {
    pub ncomp: usize,
    pub samples: Vec<(T, [T; 2])>,
}

impl<T: Scalar> BoundaryTrace<T> {
    /// Values of `field` at the boundary vertices selected by `select`,
    /// ordered by arc length. Vertices off the outer square (cavity walls) are
    /// skipped; an absent label yields an empty trace.
    pub fn extract(mesh: &Mesh<T>, field: &NodalField<T>, select: TraceSelect) -> Self {
        field.check_on(mesh).expect("field lives on mesh");
        let mut seen = std::collections::BTreeSet::new();
        for e in mesh.boundary_edges() {
            if select.matches(e.label) {
                seen.insert(e.a);
                seen.insert(e.b);
            }
        }
        let mut samples: Vec<(T, [T; 2])> = seen
            .into_iter()
            .filter_map(|v| {
                arc_param(mesh.vertex(v)).map(|s| {
                    let vals = field.at(v);
                    let pair = if field.ncomp == 2 {
                        [vals[0], vals[1]]
                    } else {
                        [vals[0], T::zero()]
                    };
                    (s, pair)
                })
            })
            .collect();
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Self { ncomp: field.ncomp, samples }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linear interpolation at arc length `s`; clamps outside the sampled
    /// range (open chains keep their endpoint values).
    pub fn eval(&self, s: T) -> [T; 2] {
        assert!(!self.samples.is_empty(), "empty trace");
        let n = self.samples.len();
        if s <= self.samples[0].0 {
            return self.samples[0].1;
        }
        if s >= self.samples[n - 1].0 {
            return self.samples[n - 1].1;
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.samples[mid].0 <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (s0, v0) = self.samples[lo];
        let (s1, v1) = self.samples[hi];
        let w = (s - s0) / (s1 - s0);
        [v0[0] + (v1[0] - v0[0]) * w, v0[1] + (v1[1] - v0[1]) * w]
    }

    /// Nodal values at the given mesh vertices (which must lie on the outer
    /// boundary), by arc-length interpolation.
    pub fn interp_at_vertices(&self, mesh: &Mesh<T>, vertices: &[usize]) -> Vec<(usize, [T; 2])> {
        vertices
            .iter()
            .map(|&v| {
                let s = arc_param(mesh.vertex(v)).expect("vertex on outer boundary");
                (v, self.eval(s))
            })
            .collect()
    }
}
