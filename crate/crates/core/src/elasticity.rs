//! P1 vector finite elements for plane linear elasticity with an ersatz
//! inclusion coefficient, plus the scalar mass/stiffness operators shared by
//! the phase-field time stepping.

use crate::geom::Point2;
use crate::mesh::{Mesh, NodalField};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, SolveError, SolveOptions, SparseSystem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ElasticityError {
    #[error("inadmissible material: need mu > 0 and lambda + mu > 0, got mu={mu}, lambda={lambda}")]
    BadMaterial { mu: f64, lambda: f64 },
    #[error("ersatz contrast must lie in (0, 1], got {0}")]
    BadContrast(f64),
    #[error("no SigmaD constraint: system would be singular")]
    NoDirichletBoundary,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("traction expression: {0}")]
    BadTraction(String),
}

/// Homogeneous isotropic material: stress = 2 mu strain + lambda tr(strain) I.
/// Positive definiteness on symmetric 2x2 matrices needs mu > 0, lambda + mu > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicMaterial<T> {
    pub mu: T,
    pub lambda: T,
}

impl<T: Scalar> IsotropicMaterial<T> {
    pub fn new(mu: T, lambda: T) -> Result<Self, ElasticityError> {
        if !(mu > T::zero()) || !(lambda + mu > T::zero()) {
            return Err(ElasticityError::BadMaterial {
                mu: mu.to_f64_lossy(),
                lambda: lambda.to_f64_lossy(),
            });
        }
        Ok(Self { mu, lambda })
    }
}

/// Per-element scaling of the base tensor: s_T = 1 + (delta - 1) * mean(v on T),
/// in [delta, 1] for v in [0, 1].
pub fn ersatz_factors<T: Scalar>(
    mesh: &Mesh<T>,
    phase: &NodalField<T>,
    delta: T,
) -> Result<Vec<T>, ElasticityError> {
    if !(delta > T::zero()) || delta > T::one() {
        return Err(ElasticityError::BadContrast(delta.to_f64_lossy()));
    }
    phase.check_on(mesh).expect("phase lives on mesh");
    let third = T::one() / T::cast(3.0);
    Ok((0..mesh.num_triangles())
        .map(|t| {
            let tri = mesh.triangles()[t];
            let vbar = (phase.data[tri[0]] + phase.data[tri[1]] + phase.data[tri[2]]) * third;
            T::one() + (delta - T::one()) * vbar
        })
        .collect())
}

/// Factors for the homogeneous plate (v = 0).
pub fn unit_factors<T: Scalar>(mesh: &Mesh<T>) -> Vec<T> {
    vec![T::one(); mesh.num_triangles()]
}

/// 6x6 stiffness of one triangle, dof order (x0, y0, x1, y1, x2, y2):
/// K = s |T| B^T D B with the constant P1 strain-displacement map B.
pub fn element_stiffness<T: Scalar>(
    coords: [Point2<T>; 3],
    material: IsotropicMaterial<T>,
    s: T,
) -> [[T; 6]; 6] {
    let area = crate::geom::signed_area(coords[0], coords[1], coords[2]);
    assert!(area > T::zero(), "degenerate triangle");
    let inv2a = T::one() / (T::two() * area);
    let grads = [
        Point2::new((coords[1].y - coords[2].y) * inv2a, (coords[2].x - coords[1].x) * inv2a),
        Point2::new((coords[2].y - coords[0].y) * inv2a, (coords[0].x - coords[2].x) * inv2a),
        Point2::new((coords[0].y - coords[1].y) * inv2a, (coords[1].x - coords[0].x) * inv2a),
    ];
    let lam = material.lambda;
    let mu = material.mu;
    let lam2mu = lam + T::two() * mu;
    let w = s * area;
    let mut k = [[T::zero(); 6]; 6];
    for i in 0..3 {
        let (bi, ci) = (grads[i].x, grads[i].y);
        for j in 0..3 {
            let (bj, cj) = (grads[j].x, grads[j].y);
            k[2 * i][2 * j] = w * (lam2mu * bi * bj + mu * ci * cj);
            k[2 * i][2 * j + 1] = w * (lam * bi * cj + mu * ci * bj);
            k[2 * i + 1][2 * j] = w * (lam * ci * bj + mu * bi * cj);
            k[2 * i + 1][2 * j + 1] = w * (lam2mu * ci * cj + mu * bi * bj);
        }
    }
    k
}

/// Energy density C0 grad^ u : grad^ u (constant per triangle) for a vector
/// P1 field; multiply by s_T |T| and sum for the elastic energy.
pub fn strain_energy_density<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    u: &NodalField<T>,
) -> Vec<T> {
    assert_eq!(u.ncomp, 2);
    u.check_on(mesh).expect("field lives on mesh");
    let two = T::two();
    (0..mesh.num_triangles())
        .map(|t| {
            let grads = mesh.p1_gradients(t);
            let tri = mesh.triangles()[t];
            let mut gxx = T::zero();
            let mut gxy = T::zero();
            let mut gyx = T::zero();
            let mut gyy = T::zero();
            for k in 0..3 {
                let [ux, uy] = u.vec2(tri[k]);
                gxx += ux * grads[k].x;
                gxy += ux * grads[k].y;
                gyx += uy * grads[k].x;
                gyy += uy * grads[k].y;
            }
            let exx = gxx;
            let eyy = gyy;
            let exy = (gxy + gyx) * T::half();
            let tr = exx + eyy;
            two * material.mu * (exx * exx + eyy * eyy + two * exy * exy)
                + material.lambda * tr * tr
        })
        .collect()
}

/// Stiffness assembler with a precomputed sparsity pattern and per-element
/// value slots; numeric reassembly is a flat scatter.
pub struct ElasticityAssembler<T> {
    pattern: CsrMatrix<T>,
    slots: Vec<[usize; 36]>,
}

impl<T: Scalar> ElasticityAssembler<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        let nv = mesh.num_vertices();
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    neighbors[a].push(b);
                }
            }
        }
        let mut cols_per_row = Vec::with_capacity(2 * nv);
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
            for _ in 0..2 {
                let mut cols = Vec::with_capacity(2 * list.len());
                for &b in list.iter() {
                    cols.push(2 * b);
                    cols.push(2 * b + 1);
                }
                cols_per_row.push(cols);
            }
        }
        let pattern = CsrMatrix::from_pattern(cols_per_row);
        let slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [0usize; 36];
                for li in 0..3 {
                    for lj in 0..3 {
                        for a in 0..2 {
                            for b in 0..2 {
                                let row = 2 * tri[li] + a;
                                let col = 2 * tri[lj] + b;
                                s[(2 * li + a) * 6 + (2 * lj + b)] =
                                    pattern.slot(row, col).expect("slot in pattern");
                            }
                        }
                    }
                }
                s
            })
            .collect();
        Self { pattern, slots }
    }

    /// Assemble the stiffness with per-element factors `s` (the one-point
    /// centroid rule, exact for P1 phase and P1 displacements).
    pub fn assemble(
        &self,
        mesh: &Mesh<T>,
        material: IsotropicMaterial<T>,
        s: &[T],
    ) -> CsrMatrix<T> {
        assert_eq!(s.len(), mesh.num_triangles());
        let mut matrix = self.pattern.clone();
        for (t, slots) in self.slots.iter().enumerate() {
            let k = element_stiffness(mesh.triangle_points(t), material, s[t]);
            let values = matrix.values_mut();
            for (flat, &slot) in slots.iter().enumerate() {
                values[slot] += k[flat / 6][flat % 6];
            }
        }
        matrix
    }
}

/// Traction with components affine in the plane coordinates; covers the
/// experiment loads (x, y) and (-y, -x) and user constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearTraction<T> {
    /// Per component: constant, x coefficient, y coefficient.
    pub coeffs: [[T; 3]; 2],
}

impl<T: Scalar> LinearTraction<T> {
    /// g(x, y) = (x, y)
    pub fn radial() -> Self {
        let z = T::zero();
        let o = T::one();
        Self { coeffs: [[z, o, z], [z, z, o]] }
    }

    /// g(x, y) = (-y, -x)
    pub fn counter_diagonal() -> Self {
        let z = T::zero();
        let o = T::one();
        Self { coeffs: [[z, z, -o], [z, -o, z]] }
    }

    pub fn eval(&self, p: Point2<T>) -> [T; 2] {
        [
            self.coeffs[0][0] + self.coeffs[0][1] * p.x + self.coeffs[0][2] * p.y,
            self.coeffs[1][0] + self.coeffs[1][1] * p.x + self.coeffs[1][2] * p.y,
        ]
    }

    /// Parse "(expr, expr)" where each component is a sum of terms
    /// `[+-][coef][*]{x|y}` or a constant, e.g. "(x, y)", "(-y, -x)",
    /// "(0.5*x + 1, -y)".
    pub fn parse(text: &str) -> Result<Self, ElasticityError> {
        let inner = text
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| ElasticityError::BadTraction(format!("expected (gx, gy): `{text}`")))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 2 {
            return Err(ElasticityError::BadTraction(format!(
                "expected two components: `{text}`"
            )));
        }
        let mut coeffs = [[T::zero(); 3]; 2];
        for (c, part) in parts.iter().enumerate() {
            coeffs[c] = parse_affine(part)?;
        }
        Ok(Self { coeffs })
    }
}

fn parse_affine<T: Scalar>(expr: &str) -> Result<[T; 3], ElasticityError> {
    let mut out = [T::zero(); 3];
    let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(ElasticityError::BadTraction("empty component".into()));
    }
    // split into signed terms
    let mut terms: Vec<String> = Vec::new();
    for (i, ch) in compact.char_indices() {
        if (ch == '+' || ch == '-') && i > 0 {
            terms.push(String::new());
        }
        if terms.is_empty() {
            terms.push(String::new());
        }
        terms.last_mut().unwrap().push(ch);
    }
    for term in terms {
        let (sign, body) = match term.strip_prefix('-') {
            Some(rest) => (-T::one(), rest),
            None => (T::one(), term.strip_prefix('+').unwrap_or(&term)),
        };
        let (coef_str, var) = if let Some(stripped) = body.strip_suffix('x') {
            (stripped.strip_suffix('*').unwrap_or(stripped), 1usize)
        } else if let Some(stripped) = body.strip_suffix('y') {
            (stripped.strip_suffix('*').unwrap_or(stripped), 2usize)
        } else {
            (body, 0usize)
        };
        let coef = if coef_str.is_empty() && var != 0 {
            T::one()
        } else {
            coef_str
                .parse::<f64>()
                .map(T::cast)
                .map_err(|_| ElasticityError::BadTraction(format!("bad term `{term}`")))?
        };
        out[var] += sign * coef;
    }
    Ok(out)
}

/// Two-point Gauss rule on the unit interval (exact through cubic).
fn gauss2<T: Scalar>() -> [(T, T); 2] {
    let c = T::cast(0.5 / 1.7320508075688772);
    [
        (T::half() - c, T::half()),
        (T::half() + c, T::half()),
    ]
}

/// Nodal traction load: integral of g_h . phi over the SigmaN edges, with g_h
/// the vertex interpolant of the closed form; 2-point Gauss is exact for the
/// linear-times-linear integrand.
pub fn assemble_traction_load<T: Scalar>(mesh: &Mesh<T>, g: &LinearTraction<T>) -> Vec<T> {
    let mut load = vec![T::zero(); 2 * mesh.num_vertices()];
    for e in mesh.edges_with_label(crate::mesh::BoundaryLabel::SigmaN) {
        let pa = mesh.vertex(e.a);
        let pb = mesh.vertex(e.b);
        let len = (pb - pa).norm();
        let ga = g.eval(pa);
        let gb = g.eval(pb);
        for (t, w) in gauss2::<T>() {
            let weight = w * len;
            let phi_a = T::one() - t;
            let phi_b = t;
            for c in 0..2 {
                let gval = ga[c] * phi_a + gb[c] * phi_b;
                load[2 * e.a + c] += weight * gval * phi_a;
                load[2 * e.b + c] += weight * gval * phi_b;
            }
        }
    }
    load
}

/// Integral of g_h . u_h over SigmaN (the surface work), same quadrature as
/// the load assembly but evaluated against an arbitrary nodal field.
pub fn surface_work<T: Scalar>(mesh: &Mesh<T>, g: &LinearTraction<T>, u: &NodalField<T>) -> T {
    assert_eq!(u.ncomp, 2);
    let mut total = T::zero();
    for e in mesh.edges_with_label(crate::mesh::BoundaryLabel::SigmaN) {
        let pa = mesh.vertex(e.a);
        let pb = mesh.vertex(e.b);
        let len = (pb - pa).norm();
        let ga = g.eval(pa);
        let gb = g.eval(pb);
        let ua = u.vec2(e.a);
        let ub = u.vec2(e.b);
        for (t, w) in gauss2::<T>() {
            let phi_a = T::one() - t;
            let phi_b = t;
            for c in 0..2 {
                let gval = ga[c] * phi_a + gb[c] * phi_b;
                let uval = ua[c] * phi_a + ub[c] * phi_b;
                total += w * len * gval * uval;
            }
        }
    }
    total
}

/// Dirichlet data on SigmaN vertices: (vertex, prescribed displacement).
pub type DirichletData<T> = Vec<(usize, [T; 2])>;

/// Per-mesh solver context: assembly pattern plus the clamped vertex sets.
/// Holds no reference to the mesh; pass it back in where geometry is needed.
pub struct ElasticityContext<T> {
    assembler: ElasticityAssembler<T>,
    sigma_d: Vec<usize>,
    sigma_n: Vec<usize>,
}

impl<T: Scalar> ElasticityContext<T> {
    pub fn new(mesh: &Mesh<T>) -> Result<Self, ElasticityError> {
        let sigma_d: Vec<usize> = mesh.sigma_d_vertices().into_iter().collect();
        if sigma_d.is_empty() {
            return Err(ElasticityError::NoDirichletBoundary);
        }
        Ok(Self {
            assembler: ElasticityAssembler::new(mesh),
            sigma_d,
            sigma_n: mesh.sigma_n_vertices(),
        })
    }

    pub fn sigma_n_vertices(&self) -> &[usize] {
        &self.sigma_n
    }

    pub fn sigma_d_vertices(&self) -> &[usize] {
        &self.sigma_d
    }

    pub fn stiffness(&self, mesh: &Mesh<T>, material: IsotropicMaterial<T>, s: &[T]) -> CsrMatrix<T> {
        self.assembler.assemble(mesh, material, s)
    }

    fn clamp_constraints(&self) -> Vec<(usize, T)> {
        self.sigma_d
            .iter()
            .flat_map(|&v| [(2 * v, T::zero()), (2 * v + 1, T::zero())])
            .collect()
    }

    /// Neumann state system: traction load on SigmaN, clamped on SigmaD.
    pub fn neumann_system(&self, stiffness: CsrMatrix<T>, load: Vec<T>) -> SparseSystem<T> {
        SparseSystem { matrix: stiffness, rhs: load, constraints: self.clamp_constraints() }
    }

    /// Dirichlet state system: prescribed trace f on SigmaN, zero on SigmaD.
    /// Constraint elimination realizes the lifting with zero interior values
    /// and solves for the correction in one pass.
    pub fn dirichlet_system(
        &self,
        stiffness: CsrMatrix<T>,
        f: &DirichletData<T>,
    ) -> SparseSystem<T> {
        let n = stiffness.n();
        let mut constraints = self.clamp_constraints();
        for &(v, val) in f {
            constraints.push((2 * v, val[0]));
            constraints.push((2 * v + 1, val[1]));
        }
        SparseSystem { matrix: stiffness, rhs: vec![T::zero(); n], constraints }
    }

}

/// Solve a displacement system and wrap the result as a vector field.
pub fn solve_displacement<T: Scalar>(
    system: &SparseSystem<T>,
    x0: Option<&[T]>,
    opts: SolveOptions<T>,
) -> Result<NodalField<T>, ElasticityError> {
    let (x, _) = crate::sparse::solve_spd(system, x0, opts)?;
    Ok(NodalField::vector(x))
}

/// Neumann state u_N for phase `v`: traction g on SigmaN, clamped SigmaD,
/// ersatz coefficient delta on the phase.
pub fn solve_neumann_state<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    delta: T,
    phase: &NodalField<T>,
    g: &LinearTraction<T>,
) -> Result<NodalField<T>, ElasticityError> {
    let ctx = ElasticityContext::new(mesh)?;
    let s = ersatz_factors(mesh, phase, delta)?;
    let system = ctx.neumann_system(ctx.stiffness(mesh, material, &s), assemble_traction_load(mesh, g));
    solve_displacement(&system, None, SolveOptions::default())
}

/// Dirichlet state u_D for phase `v`: trace f on SigmaN, clamped SigmaD.
pub fn solve_dirichlet_state<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    delta: T,
    phase: &NodalField<T>,
    f: &DirichletData<T>,
) -> Result<NodalField<T>, ElasticityError> {
    let ctx = ElasticityContext::new(mesh)?;
    let s = ersatz_factors(mesh, phase, delta)?;
    let system = ctx.dirichlet_system(ctx.stiffness(mesh, material, &s), f);
    solve_displacement(&system, None, SolveOptions::default())
}

/// Pure-cavity forward solve on a hole mesh: plain C0 over the retained
/// triangles, no integral on the traction-free cavity wall.
pub fn solve_cavity_forward<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    g: &LinearTraction<T>,
) -> Result<NodalField<T>, ElasticityError> {
    let ctx = ElasticityContext::new(mesh)?;
    let s = unit_factors(mesh);
    let system = ctx.neumann_system(ctx.stiffness(mesh, material, &s), assemble_traction_load(mesh, g));
    solve_displacement(&system, None, SolveOptions::default())
}

/// Scalar P1 operators on the vertex pattern (shared by mass and Laplacian so
/// time-step combinations stay slot-aligned).
pub struct ScalarOperators<T> {
    pub mass: CsrMatrix<T>,
    pub laplacian: CsrMatrix<T>,
    /// Lumped mass: integral of each basis function.
    pub lumped_mass: Vec<T>,
}

pub fn scalar_operators<T: Scalar>(mesh: &Mesh<T>) -> ScalarOperators<T> {
    let nv = mesh.num_vertices();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for tri in mesh.triangles() {
        for &a in tri {
            for &b in tri {
                neighbors[a].push(b);
            }
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    let mut mass = CsrMatrix::from_pattern(neighbors.clone());
    let mut laplacian = CsrMatrix::from_pattern(neighbors);
    let mut lumped = vec![T::zero(); nv];
    let twelfth = T::one() / T::cast(12.0);
    let third = T::one() / T::cast(3.0);
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let area = mesh.triangle_area(t);
        let grads = mesh.p1_gradients(t);
        for i in 0..3 {
            lumped[tri[i]] += area * third;
            for j in 0..3 {
                let m = if i == j { T::two() } else { T::one() } * area * twelfth;
                mass.add_at(tri[i], tri[j], m);
                laplacian.add_at(tri[i], tri[j], area * grads[i].dot(grads[j]));
            }
        }
    }
    ScalarOperators { mass, laplacian, lumped_mass: lumped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_square_mesh, Side};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn material() -> IsotropicMaterial<f64> {
        IsotropicMaterial::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn material_admissibility_gate() {
        assert!(IsotropicMaterial::new(1.0, -0.2).is_ok());
        assert!(IsotropicMaterial::new(1.0, -1.0).is_err());
        assert!(IsotropicMaterial::new(0.0, 1.0).is_err());
    }

    #[test]
    fn element_kernel_contains_rigid_motions() {
        let coords = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let k = element_stiffness(coords, material(), 1.0);
        // two translations and the infinitesimal rotation (-y, x)
        let modes: [[f64; 6]; 3] = [
            [1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            [
                -coords[0].y, coords[0].x, -coords[1].y, coords[1].x, -coords[2].y, coords[2].x,
            ],
        ];
        for mode in modes {
            for row in 0..6 {
                let r: f64 = (0..6).map(|c| k[row][c] * mode[c]).sum();
                assert!(r.abs() < 1e-14, "kernel violated: {r}");
            }
        }
    }

    #[test]
    fn element_stiffness_matches_quadrature_oracle() {
        // independent route: 3-point midpoint quadrature of
        // s * (2 mu eps(phi_i):eps(phi_j) + lambda div div) with eps as matrices
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let coords = loop {
                let c = [
                    Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ];
                if crate::geom::signed_area(c[0], c[1], c[2]) > 0.05 {
                    break c;
                }
            };
            let s = rng.gen_range(0.01..1.0);
            let mat = material();
            let k = element_stiffness(coords, mat, s);

            let area = crate::geom::signed_area(coords[0], coords[1], coords[2]);
            let inv2a = 1.0 / (2.0 * area);
            let grads = [
                [(coords[1].y - coords[2].y) * inv2a, (coords[2].x - coords[1].x) * inv2a],
                [(coords[2].y - coords[0].y) * inv2a, (coords[0].x - coords[2].x) * inv2a],
                [(coords[0].y - coords[1].y) * inv2a, (coords[1].x - coords[0].x) * inv2a],
            ];
            // basis (i, a): displacement phi_i e_a; eps = sym(e_a grad_i^T)
            let eps = |i: usize, a: usize| -> [[f64; 2]; 2] {
                let g = grads[i];
                let mut grad_u = [[0.0; 2]; 2];
                grad_u[a] = g;
                [
                    [grad_u[0][0], 0.5 * (grad_u[0][1] + grad_u[1][0])],
                    [0.5 * (grad_u[0][1] + grad_u[1][0]), grad_u[1][1]],
                ]
            };
            for i in 0..3 {
                for a in 0..2 {
                    for j in 0..3 {
                        for b in 0..2 {
                            let ei = eps(i, a);
                            let ej = eps(j, b);
                            let contraction: f64 = (0..2)
                                .flat_map(|r| (0..2).map(move |c| ei[r][c] * ej[r][c]))
                                .sum();
                            let div_i = ei[0][0] + ei[1][1];
                            let div_j = ej[0][0] + ej[1][1];
                            // constant integrand: quadrature = weight sum * value
                            let mut quad = 0.0;
                            for _ in 0..3 {
                                quad += (area / 3.0)
                                    * s
                                    * (2.0 * mat.mu * contraction + mat.lambda * div_i * div_j);
                            }
                            let got = k[2 * i + a][2 * j + b];
                            assert!((got - quad).abs() < 1e-12, "{got} vs {quad}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn traction_load_matches_closed_form_integrals() {
        let mesh = generate_square_mesh::<f64>(4, &[Side::Bottom]);
        let g = LinearTraction::radial();
        let load = assemble_traction_load(&mesh, &g);
        // symbolic oracle: on edge (a, b) of length L the P1 x P1 integrals are
        // L (g(a)/3 + g(b)/6) at a and L (g(a)/6 + g(b)/3) at b
        let mut expect = vec![0.0; 2 * mesh.num_vertices()];
        for e in mesh.edges_with_label(crate::mesh::BoundaryLabel::SigmaN) {
            let pa = mesh.vertex(e.a);
            let pb = mesh.vertex(e.b);
            let len = (pb - pa).norm();
            let ga = g.eval(pa);
            let gb = g.eval(pb);
            for c in 0..2 {
                expect[2 * e.a + c] += len * (ga[c] / 3.0 + gb[c] / 6.0);
                expect[2 * e.b + c] += len * (ga[c] / 6.0 + gb[c] / 3.0);
            }
        }
        for (got, want) in load.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn full_phase_scales_system_by_delta() {
        let mesh = generate_square_mesh::<f64>(6, &[Side::Bottom]);
        let assembler = ElasticityAssembler::new(&mesh);
        let delta = 1e-2;
        let zero = NodalField::scalar(vec![0.0; mesh.num_vertices()]);
        let one = NodalField::scalar(vec![1.0; mesh.num_vertices()]);
        let k0 = assembler.assemble(&mesh, material(), &ersatz_factors(&mesh, &zero, delta).unwrap());
        let k1 = assembler.assemble(&mesh, material(), &ersatz_factors(&mesh, &one, delta).unwrap());
        for (a, b) in k0.values().iter().zip(k1.values()) {
            assert!((a * delta - b).abs() < 1e-14);
        }
    }

    #[test]
    fn assembled_matrix_symmetric_for_random_phase() {
        let mesh = generate_square_mesh::<f64>(8, &[Side::Bottom]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = NodalField::scalar((0..mesh.num_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect());
        let assembler = ElasticityAssembler::new(&mesh);
        let k = assembler.assemble(&mesh, material(), &ersatz_factors(&mesh, &v, 1e-2).unwrap());
        assert!(k.symmetry_defect() < 1e-14);
    }

    #[test]
    fn ersatz_bounds_on_energy() {
        // delta a0(u,u) <= a_v(u,u) <= a0(u,u)
        let mesh = generate_square_mesh::<f64>(6, &[Side::Bottom]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = NodalField::scalar((0..mesh.num_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect());
        let u: Vec<f64> = (0..2 * mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let assembler = ElasticityAssembler::new(&mesh);
        let delta = 1e-2;
        let zero = NodalField::scalar(vec![0.0; mesh.num_vertices()]);
        let k0 = assembler.assemble(&mesh, material(), &ersatz_factors(&mesh, &zero, delta).unwrap());
        let kv = assembler.assemble(&mesh, material(), &ersatz_factors(&mesh, &v, delta).unwrap());
        let quad = |k: &CsrMatrix<f64>| {
            let mut y = vec![0.0; u.len()];
            k.matvec(&u, &mut y);
            crate::sparse::dot(&u, &y)
        };
        let a0 = quad(&k0);
        let av = quad(&kv);
        assert!(av <= a0 + 1e-12);
        assert!(av >= delta * a0 - 1e-12);
    }

    #[test]
    fn neumann_state_work_identity_and_trivial_cases() {
        let mesh = generate_square_mesh::<f64>(12, &[Side::Bottom]);
        let mat = material();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = NodalField::scalar((0..mesh.num_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect());
        let g = LinearTraction::radial();
        let u = solve_neumann_state(&mesh, mat, 1e-2, &v, &g).unwrap();
        let s = ersatz_factors(&mesh, &v, 1e-2).unwrap();
        let density = strain_energy_density(&mesh, mat, &u);
        let energy: f64 = (0..mesh.num_triangles())
            .map(|t| s[t] * mesh.triangle_area(t) * density[t])
            .sum();
        let work = surface_work(&mesh, &g, &u);
        assert!((energy - work).abs() <= 1e-8 * work.abs().max(1.0), "{energy} vs {work}");

        // zero load gives the zero state
        let zero_g = LinearTraction { coeffs: [[0.0; 3]; 2] };
        let u0 = solve_neumann_state(&mesh, mat, 1e-2, &v, &zero_g).unwrap();
        assert!(u0.data.iter().all(|&x| x.abs() < 1e-14));

        // contrast removed: delta = 1 matches the homogeneous solve
        let u1 = solve_neumann_state(&mesh, mat, 1.0, &v, &g).unwrap();
        let zero = NodalField::scalar(vec![0.0; mesh.num_vertices()]);
        let uh = solve_neumann_state(&mesh, mat, 1e-2, &zero, &g).unwrap();
        for (a, b) in u1.data.iter().zip(&uh.data) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dirichlet_state_reproduces_trace_and_self_consistency() {
        let mesh = generate_square_mesh::<f64>(10, &[Side::Bottom]);
        let mat = material();
        let zero = NodalField::scalar(vec![0.0; mesh.num_vertices()]);
        let g = LinearTraction::radial();
        let u_n = solve_neumann_state(&mesh, mat, 1e-2, &zero, &g).unwrap();
        let f: DirichletData<f64> = mesh
            .sigma_n_vertices()
            .iter()
            .map(|&v| (v, u_n.vec2(v)))
            .collect();
        let u_d = solve_dirichlet_state(&mesh, mat, 1e-2, &zero, &f).unwrap();
        // trace reproduced nodal-exactly
        for &(vtx, val) in &f {
            assert_eq!(u_d.vec2(vtx), val);
        }
        for &vtx in mesh.sigma_d_vertices().iter() {
            assert_eq!(u_d.vec2(vtx), [0.0, 0.0]);
        }
        // inverse-crime data: u_D reproduces u_N everywhere (solver tolerance)
        for (a, b) in u_d.data.iter().zip(&u_n.data) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }

        // f = 0 gives the zero state
        let f0: DirichletData<f64> = mesh.sigma_n_vertices().iter().map(|&v| (v, [0.0, 0.0])).collect();
        let u0 = solve_dirichlet_state(&mesh, mat, 1e-2, &zero, &f0).unwrap();
        assert!(u0.data.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn patch_test_affine_reproduction() {
        // affine displacement prescribed on the whole boundary; P1 reproduces
        // it exactly in the interior
        let mesh = generate_square_mesh::<f64>(8, &[Side::Bottom]);
        let ctx = ElasticityContext::new(&mesh).unwrap();
        let mat = material();
        let s = unit_factors(&mesh);
        let affine = |p: Point2<f64>| [0.1 + 0.3 * p.x - 0.2 * p.y, -0.4 + 0.1 * p.x + 0.5 * p.y];
        let boundary: Vec<usize> = (0..mesh.num_vertices())
            .filter(|&v| {
                let p = mesh.vertex(v);
                p.x.abs() > 1.0 - 1e-12 || p.y.abs() > 1.0 - 1e-12
            })
            .collect();
        let stiffness = ctx.stiffness(&mesh, mat, &s);
        let n = stiffness.n();
        let constraints: Vec<(usize, f64)> = boundary
            .iter()
            .flat_map(|&v| {
                let val = affine(mesh.vertex(v));
                [(2 * v, val[0]), (2 * v + 1, val[1])]
            })
            .collect();
        let system = SparseSystem { matrix: stiffness, rhs: vec![0.0; n], constraints };
        let opts = SolveOptions { rel_tol: 1e-14, ..Default::default() };
        let (x, _) = crate::sparse::solve_spd(&system, None, opts).unwrap();
        for v in 0..mesh.num_vertices() {
            let want = affine(mesh.vertex(v));
            assert!((x[2 * v] - want[0]).abs() < 1e-10);
            assert!((x[2 * v + 1] - want[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_sigma_d_refused() {
        let mesh = generate_square_mesh::<f64>(4, &[]);
        assert!(matches!(
            ElasticityContext::new(&mesh),
            Err(ElasticityError::NoDirichletBoundary)
        ));
    }

    #[test]
    fn traction_parser_accepts_experiment_loads() {
        let g1 = LinearTraction::<f64>::parse("(x, y)").unwrap();
        assert_eq!(g1, LinearTraction::radial());
        let g2 = LinearTraction::<f64>::parse("(-y, -x)").unwrap();
        assert_eq!(g2, LinearTraction::counter_diagonal());
        let g3 = LinearTraction::<f64>::parse("(0.5*x + 1, -y)").unwrap();
        assert_eq!(g3.eval(Point2::new(2.0, 3.0)), [2.0, -3.0]);
        assert!(LinearTraction::<f64>::parse("x, y").is_err());
        assert!(LinearTraction::<f64>::parse("(x*y, 0)").is_err());
    }

    #[test]
    fn scalar_operators_consistency() {
        let mesh = generate_square_mesh::<f64>(5, &[Side::Bottom]);
        let ops = scalar_operators(&mesh);
        // row sums of the consistent mass equal the lumped mass
        let ones = vec![1.0; mesh.num_vertices()];
        let mut row_sums = vec![0.0; mesh.num_vertices()];
        ops.mass.matvec(&ones, &mut row_sums);
        for (rs, lm) in row_sums.iter().zip(&ops.lumped_mass) {
            assert!((rs - lm).abs() < 1e-14);
        }
        // total mass is the domain area, Laplacian annihilates constants
        let total: f64 = ops.lumped_mass.iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
        let mut ly = vec![0.0; mesh.num_vertices()];
        ops.laplacian.matvec(&ones, &mut ly);
        assert!(ly.iter().all(|&x| x.abs() < 1e-12));
    }
}
