//! Semi-implicit gradient flow on the phase field: per-step forward solves,
//! obstacle QP via PDAS, energy-monotone time-step control, gradient-driven
//! refinement, and reconstruction metrics.

use crate::elasticity::{
    assemble_traction_load, ersatz_factors, scalar_operators, solve_displacement, DirichletData,
    ElasticityContext, ElasticityError, IsotropicMaterial, ScalarOperators,
};
use crate::functional::{
    driving_term, elastic_energy, jnd_constant, mm_value, EnergyBreakdown, StatePair,
};
use crate::geom::{Point2, ShapeSpec};
use crate::mesh::{refine, Mesh, MeshError, NodalField};
use crate::pdas::{pdas_solve, ObstacleQP, QpError};
use crate::scalar::Scalar;
use crate::sparse::SolveOptions;
use crate::synthdata::Measurement;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("config: {0}")]
    BadConfig(String),
    #[error("initial phase violates the admissible set: {0}")]
    BadInitialPhase(String),
    #[error("step {iteration}: {halvings} time-step halvings without energy descent")]
    NoDescent { iteration: usize, halvings: usize },
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Algorithm parameters. Defaults follow the experiment table: tol = 1e-5,
/// gamma in [1e-2, 1e-1], tau in [1e-4, 1e-3], eps = 1/(16 pi), delta = 1e-2,
/// refinement gate tol_ref = 7e-5 with period n_ref.
#[derive(Clone, Copy, Debug)]
pub struct InversionConfig<T> {
    pub gamma: T,
    pub epsilon: T,
    pub delta: T,
    pub tau_init: T,
    pub tau_max: T,
    pub tol: T,
    pub tol_ref: T,
    pub n_ref: usize,
    pub d0: T,
    pub max_iterations: usize,
    pub refine_fraction: T,
    pub material: IsotropicMaterial<T>,
    pub seed: u64,
}

impl<T: Scalar> InversionConfig<T> {
    pub fn table_defaults(material: IsotropicMaterial<T>) -> Self {
        Self {
            gamma: T::cast(1e-1),
            epsilon: T::cast(1.0 / (16.0 * std::f64::consts::PI)),
            delta: T::cast(1e-2),
            tau_init: T::cast(1e-3),
            tau_max: T::cast(1e-2),
            tol: T::cast(1e-5),
            tol_ref: T::cast(7e-5),
            n_ref: 2000,
            d0: T::cast(0.1),
            max_iterations: 20_000,
            refine_fraction: T::cast(0.15),
            material,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), InversionError> {
        let fail = |msg: String| Err(InversionError::BadConfig(msg));
        if self.tol.is_finite() && !(self.tol < self.tol_ref) {
            return fail(format!("tol {} must be below tol_ref {}", self.tol, self.tol_ref));
        }
        if !(self.tau_init > T::zero() && self.tau_init < T::one()) {
            return fail(format!("tau_init {} outside (0, 1)", self.tau_init));
        }
        if !(self.tau_max >= self.tau_init) {
            return fail(format!("tau_max {} below tau_init {}", self.tau_max, self.tau_init));
        }
        if !(self.epsilon > T::zero()) {
            return fail(format!("epsilon {} must be positive", self.epsilon));
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return fail(format!("delta {} outside (0, 1)", self.delta));
        }
        if !(self.gamma > T::zero()) {
            return fail(format!("gamma {} must be positive", self.gamma));
        }
        if !(self.d0 > T::zero() && self.d0 < T::one()) {
            return fail(format!("d0 {} outside (0, 1)", self.d0));
        }
        if !(self.refine_fraction > T::zero() && self.refine_fraction <= T::one()) {
            return fail(format!("refine_fraction {} outside (0, 1]", self.refine_fraction));
        }
        if self.n_ref == 0 {
            return fail("n_ref must be positive".into());
        }
        Ok(())
    }
}

/// One completed outer iteration.
#[derive(Clone, Copy, Debug)]
pub struct HistoryRow<T> {
    pub n: usize,
    pub tau: T,
    pub step_norm: T,
    pub energy: EnergyBreakdown<T>,
    pub accepted: bool,
    pub rejections: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Progress {
    Continuing,
    Converged,
    MaxIterations,
}

/// Measurement realized on the current mesh.
struct Realized<T> {
    load: Vec<T>,
    f: DirichletData<T>,
    jnd: T,
}

/// Full solver state for one reconstruction run. The loop owns its mesh and
/// phase; refinement swaps in a new mesh and transfers the field exactly.
pub struct Inversion<T> {
    pub config: InversionConfig<T>,
    measurements: Vec<Measurement<T>>,
    mesh: Mesh<T>,
    v: NodalField<T>,
    pub tau: T,
    pub iteration: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub converged: bool,
    pub last_step_norm: T,
    pub history: Vec<HistoryRow<T>>,
    pub refined_at: Vec<usize>,
    band: Vec<usize>,
    ctx: ElasticityContext<T>,
    ops: ScalarOperators<T>,
    realized: Vec<Realized<T>>,
    states: Option<Vec<(NodalField<T>, NodalField<T>)>>,
    warm: Option<Vec<(NodalField<T>, NodalField<T>)>>,
    energy: Option<EnergyBreakdown<T>>,
}

const MAX_HALVINGS: usize = 20;
const ACCEPT_SLACK: f64 = 1e-12;
const TAU_GROWTH: f64 = 1.2;

impl<T: Scalar> Inversion<T> {
    pub fn new(
        mesh: Mesh<T>,
        config: InversionConfig<T>,
        measurements: Vec<Measurement<T>>,
        v0: Option<NodalField<T>>,
    ) -> Result<Self, InversionError> {
        config.validate()?;
        let band = mesh.inner_band(config.d0);
        let v = match v0 {
            None => NodalField::scalar(vec![T::zero(); mesh.num_vertices()]),
            Some(v) => {
                v.check_on(&mesh)?;
                if v.data.iter().any(|&x| x < T::zero() || x > T::one()) {
                    return Err(InversionError::BadInitialPhase("value outside [0, 1]".into()));
                }
                if band.iter().any(|&i| v.data[i] != T::zero()) {
                    return Err(InversionError::BadInitialPhase(
                        "nonzero on the protected boundary band".into(),
                    ));
                }
                v
            }
        };
        let ctx = ElasticityContext::new(&mesh)?;
        let ops = scalar_operators(&mesh);
        let realized = realize_all(&mesh, &measurements);
        Ok(Self {
            tau: config.tau_init,
            config,
            measurements,
            mesh,
            v,
            iteration: 0,
            accepted_steps: 0,
            rejected_steps: 0,
            converged: false,
            last_step_norm: T::infinity(),
            history: Vec::new(),
            refined_at: Vec::new(),
            band,
            ctx,
            ops,
            realized,
            states: None,
            warm: None,
            energy: None,
        })
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn phase(&self) -> &NodalField<T> {
        &self.v
    }

    pub fn measurements(&self) -> &[Measurement<T>] {
        &self.measurements
    }

    pub fn current_energy(&mut self) -> Result<EnergyBreakdown<T>, InversionError> {
        self.ensure_states()?;
        Ok(self.energy.expect("energy cached after ensure_states"))
    }

    fn solve_states_at(
        &self,
        v: &NodalField<T>,
        warm: Option<&Vec<(NodalField<T>, NodalField<T>)>>,
    ) -> Result<(Vec<(NodalField<T>, NodalField<T>)>, EnergyBreakdown<T>), InversionError> {
        let cfg = &self.config;
        let factors = ersatz_factors(&self.mesh, v, cfg.delta)?;
        let stiffness = self.ctx.stiffness(&self.mesh, cfg.material, &factors);
        let mut systems = Vec::with_capacity(2 * self.realized.len());
        for (i, r) in self.realized.iter().enumerate() {
            let sys_n = self.ctx.neumann_system(stiffness.clone(), r.load.clone());
            let warm_n = warm.map(|w| w[i].0.data.as_slice());
            systems.push((sys_n, warm_n));
            let sys_d = self.ctx.dirichlet_system(stiffness.clone(), &r.f);
            let warm_d = warm.map(|w| w[i].1.data.as_slice());
            systems.push((sys_d, warm_d));
        }
        let opts = SolveOptions::default();
        let solutions: Result<Vec<NodalField<T>>, ElasticityError> = systems
            .par_iter()
            .map(|(sys, x0)| solve_displacement(sys, *x0, opts))
            .collect();
        let solutions = solutions?;
        let mut states = Vec::with_capacity(self.realized.len());
        let mut jn = T::zero();
        let mut jd = T::zero();
        let mut jnd = T::zero();
        for (i, chunk) in solutions.chunks_exact(2).enumerate() {
            jn += elastic_energy(&self.mesh, cfg.material, &factors, &chunk[0]);
            jd += elastic_energy(&self.mesh, cfg.material, &factors, &chunk[1]);
            jnd += self.realized[i].jnd;
            states.push((chunk[0].clone(), chunk[1].clone()));
        }
        let (mm_grad, mm_pot) = mm_value(&self.mesh, v, cfg.gamma, cfg.epsilon);
        Ok((states, EnergyBreakdown::new(jn, jd, jnd, mm_grad, mm_pot)))
    }

    fn ensure_states(&mut self) -> Result<(), InversionError> {
        if self.states.is_some() {
            return Ok(());
        }
        let warm = self.warm.take();
        let (states, energy) = self.solve_states_at(&self.v, warm.as_ref())?;
        self.states = Some(states);
        self.energy = Some(energy);
        Ok(())
    }

    /// One outer iteration: states at v^n, driving term, obstacle QP, and the
    /// energy-descent accept/reject loop with time-step halving.
    pub fn step(&mut self) -> Result<HistoryRow<T>, InversionError> {
        self.ensure_states()?;
        let energy_old = self.energy.expect("cached");
        let d = {
            let states = self.states.as_ref().expect("cached");
            let pairs: Vec<StatePair<'_, T>> = states
                .iter()
                .map(|(u_n, u_d)| StatePair { u_n, u_d })
                .collect();
            driving_term(&self.mesh, self.config.material, self.config.delta, &pairs)
        };
        let slack = T::cast(ACCEPT_SLACK);
        let mut rejections = 0usize;
        loop {
            let qp = build_step_qp(
                &self.ops,
                &self.v,
                &d,
                &self.band,
                self.tau,
                self.config.gamma,
                self.config.epsilon,
            );
            let (v_new, cert, _outer) = pdas_solve(&qp, None, &self.v.data, 100)?;
            debug_assert!(cert.is_valid(), "PDAS certificate invalid: {:?}", cert.max_violation);
            let v_new = NodalField::scalar(v_new);
            let (states_new, energy_new) =
                self.solve_states_at(&v_new, self.states.as_ref())?;
            if energy_new.total <= energy_old.total + slack {
                let tau_used = self.tau;
                let norm = step_norm(&v_new, &self.v);
                self.v = v_new;
                self.states = Some(states_new);
                self.energy = Some(energy_new);
                self.tau = (self.tau * T::cast(TAU_GROWTH)).min(self.config.tau_max);
                self.iteration += 1;
                self.accepted_steps += 1;
                self.last_step_norm = norm;
                let row = HistoryRow {
                    n: self.iteration,
                    tau: tau_used,
                    step_norm: norm,
                    energy: energy_new,
                    accepted: true,
                    rejections,
                };
                self.history.push(row);
                return Ok(row);
            }
            self.rejected_steps += 1;
            rejections += 1;
            self.tau = self.tau * T::half();
            if rejections >= MAX_HALVINGS {
                return Err(InversionError::NoDescent {
                    iteration: self.iteration + 1,
                    halvings: rejections,
                });
            }
        }
    }

    /// Step, then apply the stopping rule and the refinement schedule.
    pub fn advance(&mut self) -> Result<(HistoryRow<T>, Progress), InversionError> {
        let row = self.step()?;
        if row.step_norm <= self.config.tol {
            self.converged = true;
            return Ok((row, Progress::Converged));
        }
        if self.iteration >= self.config.max_iterations {
            return Ok((row, Progress::MaxIterations));
        }
        if row.step_norm <= self.config.tol_ref && self.iteration % self.config.n_ref == 0 {
            self.refine_mesh()?;
        }
        Ok((row, Progress::Continuing))
    }

    /// Loop to convergence or the iteration cap.
    pub fn run(&mut self) -> Result<Progress, InversionError> {
        loop {
            let (_, progress) = self.advance()?;
            if progress != Progress::Continuing {
                return Ok(progress);
            }
        }
    }

    /// Gradient-marked bisection refinement with exact transfer of the phase
    /// and warm-start states; boundary data is re-realized from the stored
    /// measurement traces, never from the previous mesh.
    pub fn refine_mesh(&mut self) -> Result<(), InversionError> {
        let marked: std::collections::BTreeSet<usize> = self
            .mesh
            .mark_by_gradient(&self.v, self.config.refine_fraction)
            .into_iter()
            .collect();
        let (new_mesh, prolongation) = refine(&self.mesh, &marked);
        let mut v = prolongation.apply(&self.v);
        let band = new_mesh.inner_band(self.config.d0);
        for &i in &band {
            v.data[i] = T::zero();
        }
        let warm = self.states.take().map(|states| {
            states
                .into_iter()
                .map(|(u_n, u_d)| (prolongation.apply(&u_n), prolongation.apply(&u_d)))
                .collect::<Vec<_>>()
        });
        self.ctx = ElasticityContext::new(&new_mesh)?;
        self.ops = scalar_operators(&new_mesh);
        self.realized = realize_all(&new_mesh, &self.measurements);
        self.mesh = new_mesh;
        self.v = v;
        self.band = band;
        self.warm = warm;
        self.states = None;
        self.energy = None;
        self.refined_at.push(self.iteration);
        Ok(())
    }

    /// The obstacle QP the next step would solve at the current phase and
    /// time step (states are solved if not cached).
    pub fn current_step_qp(&mut self) -> Result<ObstacleQP<T>, InversionError> {
        self.ensure_states()?;
        let states = self.states.as_ref().expect("cached");
        let pairs: Vec<StatePair<'_, T>> =
            states.iter().map(|(u_n, u_d)| StatePair { u_n, u_d }).collect();
        let d = driving_term(&self.mesh, self.config.material, self.config.delta, &pairs);
        Ok(build_step_qp(
            &self.ops,
            &self.v,
            &d,
            &self.band,
            self.tau,
            self.config.gamma,
            self.config.epsilon,
        ))
    }

    /// Everything needed to continue a run bit-identically.
    pub fn snapshot(&mut self) -> Result<RunSnapshot<T>, InversionError> {
        self.ensure_states()?;
        Ok(RunSnapshot {
            iteration: self.iteration,
            tau: self.tau,
            accepted_steps: self.accepted_steps,
            rejected_steps: self.rejected_steps,
            last_step_norm: self.last_step_norm,
            v: self.v.data.clone(),
            states: self
                .states
                .as_ref()
                .expect("cached")
                .iter()
                .map(|(a, b)| (a.data.clone(), b.data.clone()))
                .collect(),
        })
    }

    pub fn restore(
        mesh: Mesh<T>,
        config: InversionConfig<T>,
        measurements: Vec<Measurement<T>>,
        snap: RunSnapshot<T>,
    ) -> Result<Self, InversionError> {
        let mut inv = Self::new(mesh, config, measurements, Some(NodalField::scalar(snap.v)))?;
        inv.iteration = snap.iteration;
        inv.tau = snap.tau;
        inv.accepted_steps = snap.accepted_steps;
        inv.rejected_steps = snap.rejected_steps;
        inv.last_step_norm = snap.last_step_norm;
        let states: Vec<(NodalField<T>, NodalField<T>)> = snap
            .states
            .into_iter()
            .map(|(a, b)| (NodalField::vector(a), NodalField::vector(b)))
            .collect();
        // recompute the energy from the restored states deterministically
        let factors = ersatz_factors(&inv.mesh, &inv.v, inv.config.delta)?;
        let mut jn = T::zero();
        let mut jd = T::zero();
        let mut jnd = T::zero();
        for (i, (u_n, u_d)) in states.iter().enumerate() {
            jn += elastic_energy(&inv.mesh, inv.config.material, &factors, u_n);
            jd += elastic_energy(&inv.mesh, inv.config.material, &factors, u_d);
            jnd += inv.realized[i].jnd;
        }
        let (mm_grad, mm_pot) = mm_value(&inv.mesh, &inv.v, inv.config.gamma, inv.config.epsilon);
        inv.energy = Some(EnergyBreakdown::new(jn, jd, jnd, mm_grad, mm_pot));
        inv.states = Some(states);
        Ok(inv)
    }
}

/// Serializable continuation point (mesh stored separately in KVMESH form).
#[derive(Clone, Debug)]
pub struct RunSnapshot<T> {
    pub iteration: usize,
    pub tau: T,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub last_step_norm: T,
    pub v: Vec<T>,
    pub states: Vec<(Vec<T>, Vec<T>)>,
}

fn realize_all<T: Scalar>(mesh: &Mesh<T>, measurements: &[Measurement<T>]) -> Vec<Realized<T>> {
    measurements
        .iter()
        .map(|m| {
            let f = m.dirichlet_data(mesh);
            Realized {
                load: assemble_traction_load(mesh, &m.g),
                jnd: jnd_constant(mesh, &m.g, &f),
                f,
            }
        })
        .collect()
}

/// Time-step QP: A = (1/tau) M + 2 gamma eps K_lap,
/// b = (1/tau) M v^n - (gamma/eps) M (1 - 2 v^n) - d, box [0, 1], band fixed.
pub fn build_step_qp<T: Scalar>(
    ops: &ScalarOperators<T>,
    v: &NodalField<T>,
    driving: &[T],
    band: &[usize],
    tau: T,
    gamma: T,
    epsilon: T,
) -> ObstacleQP<T> {
    let n = v.data.len();
    let inv_tau = T::one() / tau;
    let a = ops.mass.linear_combination(inv_tau, &ops.laplacian, T::two() * gamma * epsilon);
    let mut mv = vec![T::zero(); n];
    ops.mass.matvec(&v.data, &mut mv);
    let ge = gamma / epsilon;
    let b: Vec<T> = (0..n)
        .map(|i| inv_tau * mv[i] - ge * (ops.lumped_mass[i] - T::two() * mv[i]) - driving[i])
        .collect();
    ObstacleQP::boxed(a, b, band.to_vec())
}

/// Nodal max-norm of the step difference.
pub fn step_norm<T: Scalar>(v_new: &NodalField<T>, v_old: &NodalField<T>) -> T {
    assert_eq!(v_new.data.len(), v_old.data.len());
    v_new
        .data
        .iter()
        .zip(&v_old.data)
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

/// Overlap score |{v >= threshold} intersect C| / |{v >= threshold} union C|
/// by per-triangle edge-midpoint quadrature of the two indicators.
pub fn jaccard<T: Scalar>(
    mesh: &Mesh<T>,
    v: &NodalField<T>,
    truth: &[ShapeSpec<T>],
    threshold: T,
) -> T {
    assert_eq!(v.ncomp, 1);
    let third = T::one() / T::cast(3.0);
    let mut inter = T::zero();
    let mut union = T::zero();
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let pts = mesh.triangle_points(t);
        let w = mesh.triangle_area(t) * third;
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let mid: Point2<T> = (pts[k] + pts[(k + 1) % 3]) * T::half();
            let v_mid = (v.data[a] + v.data[b]) * T::half();
            let in_phase = v_mid >= threshold;
            let in_truth = truth.iter().any(|s| s.contains(mid));
            if in_phase && in_truth {
                inter += w;
            }
            if in_phase || in_truth {
                union += w;
            }
        }
    }
    if union > T::zero() {
        inter / union
    } else {
        T::one()
    }
}

/// Centroid of the region {v >= threshold} (area-weighted over triangles by
/// the same midpoint rule); None when the region is empty.
pub fn thresholded_centroid<T: Scalar>(
    mesh: &Mesh<T>,
    v: &NodalField<T>,
    threshold: T,
) -> Option<Point2<T>> {
    let third = T::one() / T::cast(3.0);
    let mut area = T::zero();
    let mut cx = T::zero();
    let mut cy = T::zero();
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let pts = mesh.triangle_points(t);
        let w = mesh.triangle_area(t) * third;
        for k in 0..3 {
            let v_mid = (v.data[tri[k]] + v.data[tri[(k + 1) % 3]]) * T::half();
            if v_mid >= threshold {
                let mid = (pts[k] + pts[(k + 1) % 3]) * T::half();
                area += w;
                cx += w * mid.x;
                cy += w * mid.y;
            }
        }
    }
    (area > T::zero()).then(|| Point2::new(cx / area, cy / area))
}
