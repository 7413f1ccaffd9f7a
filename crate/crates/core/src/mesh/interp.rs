//! Point location and P1 interpolation between meshes.

use super::{Mesh, MeshError, NodalField};
use crate::geom::{barycentric, Point2};
use crate::scalar::Scalar;

/// Brute-force triangle scan below this count, uniform-grid buckets above.
const BUCKET_THRESHOLD: usize = 5000;

/// Containing-triangle search over a fixed mesh.
pub struct Locator<'m, T> {
    mesh: &'m Mesh<T>,
    grid: Option<Grid>,
}

struct Grid {
    nx: usize,
    ny: usize,
    min: [f64; 2],
    max: [f64; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'m, T: Scalar> Locator<'m, T> {
    pub fn new(mesh: &'m Mesh<T>) -> Self {
        let nt = mesh.num_triangles();
        let grid = (nt >= BUCKET_THRESHOLD).then(|| {
            let mut min = [f64::INFINITY; 2];
            let mut max = [f64::NEG_INFINITY; 2];
            for p in mesh.vertices() {
                min[0] = min[0].min(p.x.to_f64_lossy());
                min[1] = min[1].min(p.y.to_f64_lossy());
                max[0] = max[0].max(p.x.to_f64_lossy());
                max[1] = max[1].max(p.y.to_f64_lossy());
            }
            let n = ((nt as f64 / 2.0).sqrt().ceil() as usize).max(1);
            let mut grid = Grid { nx: n, ny: n, min, max, buckets: vec![Vec::new(); n * n] };
            for t in 0..nt {
                let [a, b, c] = mesh.triangle_points(t);
                let xs = [a.x.to_f64_lossy(), b.x.to_f64_lossy(), c.x.to_f64_lossy()];
                let ys = [a.y.to_f64_lossy(), b.y.to_f64_lossy(), c.y.to_f64_lossy()];
                let (i0, j0) = grid.cell_of(xs.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::INFINITY, f64::min));
                let (i1, j1) = grid.cell_of(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        grid.buckets[j * grid.nx + i].push(t);
                    }
                }
            }
            grid
        });
        Self { mesh, grid }
    }

    /// Triangle containing `p` and its barycentric coordinates; coordinates
    /// down to -1e-12 count as inside so on-edge points resolve.
    pub fn locate(&self, p: Point2<T>) -> Option<(usize, [T; 3])> {
        let tol = T::cast(-1e-12);
        let test = |t: usize| -> Option<(usize, [T; 3])> {
            let [a, b, c] = self.mesh.triangle_points(t);
            let l = barycentric(p, a, b, c);
            (l[0] >= tol && l[1] >= tol && l[2] >= tol).then_some((t, l))
        };
        match &self.grid {
            None => (0..self.mesh.num_triangles()).find_map(test),
            Some(grid) => {
                let (i, j) = grid.cell_of(p.x.to_f64_lossy(), p.y.to_f64_lossy());
                grid.buckets[j * grid.nx + i].iter().copied().find_map(test)
            }
        }
    }

    /// P1 evaluation of a nodal field at `p`, if covered.
    pub fn evaluate(&self, field: &NodalField<T>, p: Point2<T>) -> Option<Vec<T>> {
        let (t, l) = self.locate(p)?;
        let tri = self.mesh.triangles()[t];
        let mut out = vec![T::zero(); field.ncomp];
        for k in 0..3 {
            for c in 0..field.ncomp {
                out[c] += field.data[tri[k] * field.ncomp + c] * l[k];
            }
        }
        Some(out)
    }
}

impl Grid {
    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let fx = ((x - self.min[0]) / (self.max[0] - self.min[0])).clamp(0.0, 1.0);
        let fy = ((y - self.min[1]) / (self.max[1] - self.min[1])).clamp(0.0, 1.0);
        let i = ((fx * self.nx as f64) as usize).min(self.nx - 1);
        let j = ((fy * self.ny as f64) as usize).min(self.ny - 1);
        (i, j)
    }
}

/// Interpolation result: destination field plus the destination vertices that
/// were not covered by the source (inside a source hole); those receive 0.
pub struct Interpolated<T> {
    pub field: NodalField<T>,
    pub uncovered: Vec<usize>,
}

/// P1 point evaluation of `field` (on `src`) at every vertex of `dst`.
///
/// Destination vertices on the shared outer boundary must be covered; interior
/// vertices falling inside a source hole get value 0 and are reported.
pub fn interpolate_nodal<T: Scalar>(
    src: &Mesh<T>,
    field: &NodalField<T>,
    dst: &Mesh<T>,
) -> Result<Interpolated<T>, MeshError> {
    field.check_on(src)?;
    let locator = Locator::new(src);
    let one = T::one();
    let eps = T::cast(1e-9);
    let mut data = vec![T::zero(); field.ncomp * dst.num_vertices()];
    let mut uncovered = Vec::new();
    for (i, &p) in dst.vertices().iter().enumerate() {
        match locator.evaluate(field, p) {
            Some(values) => {
                data[i * field.ncomp..(i + 1) * field.ncomp].copy_from_slice(&values);
            }
            None => {
                let on_outer = (one - p.x.abs()).abs() <= eps || (one - p.y.abs()).abs() <= eps;
                if on_outer {
                    return Err(MeshError::SharedBoundaryNotCovered { vertex: i });
                }
                uncovered.push(i);
            }
        }
    }
    Ok(Interpolated { field: NodalField { ncomp: field.ncomp, data }, uncovered })
}
