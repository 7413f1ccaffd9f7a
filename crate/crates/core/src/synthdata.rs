//! Synthetic boundary measurements: forward solves on a fine hole mesh,
//! transfer to the inversion mesh, and calibrated uniform noise.

use crate::elasticity::{solve_cavity_forward, DirichletData, ElasticityError, IsotropicMaterial, LinearTraction};
use crate::geom::ShapeSpec;
use crate::mesh::{generate_hole_mesh, BoundaryLabel, BoundaryTrace, Mesh, MeshError, NodalField, Side, TraceSelect};
use crate::scalar::Scalar;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("inverse crime: forward resolution {fine_n} must exceed the inversion mesh ({coarse_triangles} triangles)")]
    InverseCrime { fine_n: usize, coarse_triangles: usize },
    #[error("forward solve produced an empty SigmaN trace")]
    EmptyTrace,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error("noise calibration did not reach level {target} (best {best})")]
    Calibration { target: f64, best: f64 },
}

/// Uniform noise: per-dof eta drawn from (-amplitude, amplitude).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec<T> {
    pub amplitude: T,
    pub seed: u64,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn none(seed: u64) -> Self {
        Self { amplitude: T::zero(), seed }
    }
}

/// One boundary measurement: the applied traction and the measured
/// displacement trace, stored as a function of arc length so any inversion
/// mesh (initial or refined) interpolates from the same data.
#[derive(Clone, Debug)]
pub struct Measurement<T> {
    pub g: LinearTraction<T>,
    pub data: BoundaryTrace<T>,
    pub noise_level_reported: T,
}

impl<T: Scalar> Measurement<T> {
    /// Dirichlet data for the SigmaN vertices of `mesh`.
    pub fn dirichlet_data(&self, mesh: &Mesh<T>) -> DirichletData<T> {
        self.data.interp_at_vertices(mesh, &mesh.sigma_n_vertices())
    }
}

/// Clean forward results, before noise: one trace per load.
#[derive(Debug)]
pub struct ForwardData<T> {
    pub fine_mesh: Mesh<T>,
    pub loads: Vec<LinearTraction<T>>,
    pub fine_traces: Vec<BoundaryTrace<T>>,
    pub fine_states: Vec<NodalField<T>>,
}

/// Solve the pure-cavity forward problem on a fine hole mesh for every load
/// and extract outer-boundary traces.
pub fn solve_forward_data<T: Scalar>(
    shapes: &[ShapeSpec<T>],
    material: IsotropicMaterial<T>,
    loads: &[LinearTraction<T>],
    fine_n: usize,
    sigma_d: &[Side],
    d0: T,
) -> Result<ForwardData<T>, DataError> {
    let fine_mesh = generate_hole_mesh(fine_n, shapes, sigma_d, d0)?;
    let mut fine_traces = Vec::with_capacity(loads.len());
    let mut fine_states = Vec::with_capacity(loads.len());
    for g in loads {
        let u = solve_cavity_forward(&fine_mesh, material, g)?;
        let trace = BoundaryTrace::extract(&fine_mesh, &u, TraceSelect::Outer);
        if trace.is_empty() {
            return Err(DataError::EmptyTrace);
        }
        fine_traces.push(trace);
        fine_states.push(u);
    }
    Ok(ForwardData { fine_mesh, loads: loads.to_vec(), fine_traces, fine_states })
}

/// L2(SigmaN) norm of nodal trace data: edge-wise 2-point Gauss of |f_h|^2,
/// square-rooted. Vertices absent from `f` (clamped corners) count as zero.
pub fn l2_trace_norm<T: Scalar>(mesh: &Mesh<T>, f: &DirichletData<T>) -> T {
    let mut fvals = vec![[T::zero(); 2]; mesh.num_vertices()];
    for &(v, val) in f {
        fvals[v] = val;
    }
    let c = T::cast(0.5 / 1.7320508075688772);
    let gauss = [(T::half() - c, T::half()), (T::half() + c, T::half())];
    let mut total = T::zero();
    for e in mesh.edges_with_label(BoundaryLabel::SigmaN) {
        let len = (mesh.vertex(e.b) - mesh.vertex(e.a)).norm();
        for (t, w) in gauss {
            let phi_a = T::one() - t;
            let phi_b = t;
            for comp in 0..2 {
                let val = fvals[e.a][comp] * phi_a + fvals[e.b][comp] * phi_b;
                total += w * len * val * val;
            }
        }
    }
    total.sqrt()
}

/// Generation output: the measurements plus the aggregate reported level
/// sqrt(sum_i |f_i^noise - f_i|^2) / sqrt(sum_i |f_i|^2) in L2(SigmaN).
#[derive(Debug)]
pub struct GeneratedData<T> {
    pub measurements: Vec<Measurement<T>>,
    pub reported_level: T,
}

/// Interpolate the clean traces onto the inversion mesh, perturb each nodal
/// degree of freedom by eta * |f|_L2 with i.i.d. eta ~ U(-a, a), and report
/// the relative level. RNG streams split per measurement index.
pub fn apply_noise<T: Scalar>(
    forward: &ForwardData<T>,
    coarse: &Mesh<T>,
    noise: &NoiseSpec<T>,
) -> GeneratedData<T> {
    let sigma_n = coarse.sigma_n_vertices();
    let mut measurements = Vec::with_capacity(forward.loads.len());
    let mut num = T::zero();
    let mut den = T::zero();
    for (i, (g, trace)) in forward.loads.iter().zip(&forward.fine_traces).enumerate() {
        let clean: DirichletData<T> = trace.interp_at_vertices(coarse, &sigma_n);
        let norm = l2_trace_norm(coarse, &clean);
        den += norm * norm;
        if noise.amplitude == T::zero() {
            measurements.push(Measurement {
                g: *g,
                data: trace.clone(),
                noise_level_reported: T::zero(),
            });
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(i as u64 + 1);
        let noisy: DirichletData<T> = clean
            .iter()
            .map(|&(v, val)| {
                let eta0 = T::cast(rng.gen_range(-1.0..1.0)) * noise.amplitude;
                let eta1 = T::cast(rng.gen_range(-1.0..1.0)) * noise.amplitude;
                (v, [val[0] + eta0 * norm, val[1] + eta1 * norm])
            })
            .collect();
        let diff: DirichletData<T> = clean
            .iter()
            .zip(&noisy)
            .map(|(&(v, c), &(_, n))| (v, [n[0] - c[0], n[1] - c[1]]))
            .collect();
        let dn = l2_trace_norm(coarse, &diff);
        num += dn * dn;
        let mut samples = noisy
            .iter()
            .map(|&(v, val)| {
                let s = crate::mesh::arc_param(coarse.vertex(v))
                    .expect("SigmaN vertex on outer boundary");
                (s, val)
            })
            .collect::<Vec<_>>();
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        measurements.push(Measurement {
            g: *g,
            data: BoundaryTrace { ncomp: 2, samples },
            noise_level_reported: T::zero(), // filled below with the aggregate
        });
    }
    let level = if den > T::zero() { (num / den).sqrt() } else { T::zero() };
    for m in &mut measurements {
        m.noise_level_reported = level;
    }
    GeneratedData { measurements, reported_level: level }
}

/// Full pipeline: fine hole-mesh forward solves, transfer, noise.
/// Rejects same-resolution forward/inversion pairs (inverse crime guard).
pub fn generate_measurements<T: Scalar>(
    shapes: &[ShapeSpec<T>],
    material: IsotropicMaterial<T>,
    loads: &[LinearTraction<T>],
    fine_n: usize,
    coarse: &Mesh<T>,
    sigma_d: &[Side],
    d0: T,
    noise: &NoiseSpec<T>,
) -> Result<(GeneratedData<T>, ForwardData<T>), DataError> {
    if 2 * fine_n * fine_n <= coarse.num_triangles() {
        return Err(DataError::InverseCrime { fine_n, coarse_triangles: coarse.num_triangles() });
    }
    let forward = solve_forward_data(shapes, material, loads, fine_n, sigma_d, d0)?;
    let generated = apply_noise(&forward, coarse, noise);
    Ok((generated, forward))
}

/// Bisection on the amplitude until the reported level is within +-0.002 of
/// the target. For a fixed seed the reported level is monotone in the
/// amplitude, so this converges; deterministic given the seed.
pub fn calibrate_noise<T: Scalar>(
    target_level: T,
    forward: &ForwardData<T>,
    coarse: &Mesh<T>,
    seed: u64,
) -> Result<NoiseSpec<T>, DataError> {
    let tol = T::cast(2e-3);
    if target_level <= T::zero() {
        return Ok(NoiseSpec::none(seed));
    }
    let level_at =
        |a: T| apply_noise(forward, coarse, &NoiseSpec { amplitude: a, seed }).reported_level;
    let mut hi = T::one();
    let mut grow = 0;
    while level_at(hi) < target_level {
        hi = hi * T::two();
        grow += 1;
        if grow > 60 {
            return Err(DataError::Calibration {
                target: target_level.to_f64_lossy(),
                best: level_at(hi).to_f64_lossy(),
            });
        }
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * T::half();
        let level = level_at(mid);
        if (level - target_level).abs() <= tol {
            return Ok(NoiseSpec { amplitude: mid, seed });
        }
        if level < target_level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(DataError::Calibration {
        target: target_level.to_f64_lossy(),
        best: level_at((lo + hi) * T::half()).to_f64_lossy(),
    })
}
