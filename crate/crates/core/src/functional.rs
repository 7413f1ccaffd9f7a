//! Energy terms of the relaxed Kohn-Vogelius objective and the discrete
//! gradient driving the variational inequality.

use crate::elasticity::{strain_energy_density, DirichletData, IsotropicMaterial, LinearTraction, ScalarOperators};
use crate::mesh::{BoundaryLabel, Mesh, NodalField};
use crate::scalar::Scalar;
use crate::sparse::dot;

/// Energy decomposition of one objective evaluation. `jnd` is the constant
/// part, independent of the phase field; `total` is the plain sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub jn: T,
    pub jd: T,
    pub jnd: T,
    pub mm_grad: T,
    pub mm_pot: T,
    pub total: T,
}

impl<T: Scalar> EnergyBreakdown<T> {
    pub fn new(jn: T, jd: T, jnd: T, mm_grad: T, mm_pot: T) -> Self {
        Self { jn, jd, jnd, mm_grad, mm_pot, total: jn + jd + jnd + mm_grad + mm_pot }
    }
}

/// Half the weighted elastic energy (1/2) sum s_T |T| C0 grad^ u : grad^ u.
pub fn elastic_energy<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    factors: &[T],
    u: &NodalField<T>,
) -> T {
    let density = strain_energy_density(mesh, material, u);
    let sum: T = (0..mesh.num_triangles())
        .map(|t| factors[t] * mesh.triangle_area(t) * density[t])
        .sum();
    sum * T::half()
}

/// Kohn-Vogelius gap (1/2) integral C^delta grad^(u_N - u_D) : grad^(u_N - u_D).
pub fn kv_value<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    factors: &[T],
    u_n: &NodalField<T>,
    u_d: &NodalField<T>,
) -> T {
    assert_eq!(u_n.data.len(), u_d.data.len());
    let diff = NodalField::vector(
        u_n.data.iter().zip(&u_d.data).map(|(&a, &b)| a - b).collect(),
    );
    elastic_energy(mesh, material, factors, &diff)
}

/// Constant term -integral over SigmaN of g_h . f_h; 2-point Gauss per edge
/// (exact for the product of vertex interpolants). Vertices without an entry
/// in `f` (the clamped corners) contribute zero.
pub fn jnd_constant<T: Scalar>(
    mesh: &Mesh<T>,
    g: &LinearTraction<T>,
    f: &DirichletData<T>,
) -> T {
    let mut fvals = vec![[T::zero(); 2]; mesh.num_vertices()];
    for &(v, val) in f {
        fvals[v] = val;
    }
    let c = T::cast(0.5 / 1.7320508075688772);
    let gauss = [(T::half() - c, T::half()), (T::half() + c, T::half())];
    let mut total = T::zero();
    for e in mesh.edges_with_label(BoundaryLabel::SigmaN) {
        let pa = mesh.vertex(e.a);
        let pb = mesh.vertex(e.b);
        let len = (pb - pa).norm();
        let ga = g.eval(pa);
        let gb = g.eval(pb);
        for (t, w) in gauss {
            let phi_a = T::one() - t;
            let phi_b = t;
            for comp in 0..2 {
                let gval = ga[comp] * phi_a + gb[comp] * phi_b;
                let fval = fvals[e.a][comp] * phi_a + fvals[e.b][comp] * phi_b;
                total += w * len * gval * fval;
            }
        }
    }
    -total
}

/// Modica-Mortola parts: (gamma eps integral |grad v|^2,
/// (gamma / eps) integral v (1 - v)). The gradient part uses the exact
/// constant element gradient; the potential is quadratic, integrated exactly
/// by the edge-midpoint rule.
pub fn mm_value<T: Scalar>(mesh: &Mesh<T>, v: &NodalField<T>, gamma: T, epsilon: T) -> (T, T) {
    assert_eq!(v.ncomp, 1);
    v.check_on(mesh).expect("field lives on mesh");
    let third = T::one() / T::cast(3.0);
    let mut grad = T::zero();
    let mut pot = T::zero();
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let area = mesh.triangle_area(t);
        let grads = mesh.p1_gradients(t);
        let mut g = crate::geom::Point2::new(T::zero(), T::zero());
        for k in 0..3 {
            g = g + grads[k] * v.data[tri[k]];
        }
        grad += area * g.dot(g);
        for k in 0..3 {
            let vm = (v.data[tri[k]] + v.data[tri[(k + 1) % 3]]) * T::half();
            pot += area * third * vm * (T::one() - vm);
        }
    }
    (gamma * epsilon * grad, gamma / epsilon * pot)
}

/// States of one measurement at the current phase field.
pub struct StatePair<'a, T> {
    pub u_n: &'a NodalField<T>,
    pub u_d: &'a NodalField<T>,
}

/// Nodal driving vector split into its Neumann part (>= 0 nodewise for
/// delta < 1) and Dirichlet part (<= 0 nodewise); the step uses their sum.
///
/// d_i = (1/2) integral phi_i (C1 - C0)[grad^u_D:grad^u_D - grad^u_N:grad^u_N];
/// the bracket is constant per triangle, each vertex receives its |T|/3 share.
pub fn driving_term_parts<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    delta: T,
    states: &[StatePair<'_, T>],
) -> (Vec<T>, Vec<T>) {
    let nv = mesh.num_vertices();
    let mut d_n = vec![T::zero(); nv];
    let mut d_d = vec![T::zero(); nv];
    let third = T::one() / T::cast(3.0);
    let factor = (delta - T::one()) * T::half();
    for pair in states {
        let q_n = strain_energy_density(mesh, material, pair.u_n);
        let q_d = strain_energy_density(mesh, material, pair.u_d);
        for t in 0..mesh.num_triangles() {
            let share = mesh.triangle_area(t) * third;
            let contrib_n = -factor * q_n[t] * share;
            let contrib_d = factor * q_d[t] * share;
            for &vtx in &mesh.triangles()[t] {
                d_n[vtx] += contrib_n;
                d_d[vtx] += contrib_d;
            }
        }
    }
    (d_n, d_d)
}

pub fn driving_term<T: Scalar>(
    mesh: &Mesh<T>,
    material: IsotropicMaterial<T>,
    delta: T,
    states: &[StatePair<'_, T>],
) -> Vec<T> {
    let (d_n, d_d) = driving_term_parts(mesh, material, delta, states);
    d_n.into_iter().zip(d_d).map(|(a, b)| a + b).collect()
}

/// Directional derivative J'(v)[theta] =
/// d . theta + 2 gamma eps theta^T K v + (gamma / eps) (m . theta - 2 theta^T M v),
/// with K the scalar stiffness, M the consistent mass, m the lumped mass.
pub fn gradient_action<T: Scalar>(
    ops: &ScalarOperators<T>,
    v: &NodalField<T>,
    theta: &[T],
    driving: &[T],
    gamma: T,
    epsilon: T,
) -> T {
    let n = v.data.len();
    assert_eq!(theta.len(), n);
    assert_eq!(driving.len(), n);
    let mut kv = vec![T::zero(); n];
    ops.laplacian.matvec(&v.data, &mut kv);
    let mut mv = vec![T::zero(); n];
    ops.mass.matvec(&v.data, &mut mv);
    let two = T::two();
    dot(driving, theta)
        + two * gamma * epsilon * dot(theta, &kv)
        + gamma / epsilon * (dot(&ops.lumped_mass, theta) - two * dot(theta, &mv))
}
