//! Quick invariant suite: one pass/fail line per check, nonzero exit on any
//! failure. Runs in seconds; the full acceptance suite lives in the library's
//! integration tests.

use anyhow::{bail, Result};
use kv2d::elasticity::{
    ersatz_factors, scalar_operators, solve_dirichlet_state, solve_neumann_state, surface_work,
    DirichletData, ElasticityAssembler, IsotropicMaterial, LinearTraction,
};
use kv2d::functional::{
    driving_term, elastic_energy, gradient_action, jnd_constant, kv_value, mm_value, StatePair,
};
use kv2d::geom::ShapeSpec;
use kv2d::inversion::{Inversion, InversionConfig};
use kv2d::mesh::{
    generate_hole_mesh, generate_square_mesh, interpolate_nodal, refine, NodalField, Side,
};
use kv2d::pdas::{pdas_solve, projected_gauss_seidel, ObstacleQP};
use kv2d::sparse::CsrMatrix;
use kv2d::synthdata::{generate_measurements, NoiseSpec};

struct Tally {
    failures: usize,
}

impl Tally {
    fn check(&mut self, name: &str, outcome: std::result::Result<(), String>) {
        match outcome {
            Ok(()) => println!("PASS {name}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                self.failures += 1;
            }
        }
    }
}

fn ensure(cond: bool, why: &str) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why.to_string())
    }
}

fn material() -> IsotropicMaterial<f64> {
    IsotropicMaterial::new(0.5, 1.0).unwrap()
}

fn pseudo_random(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    // splitmix64 stream, good enough for test fields
    let mut state = seed.wrapping_add(0x9E3779B97F4A7C15);
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            lo + (hi - lo) * (z >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

pub fn run() -> Result<()> {
    let mut tally = Tally { failures: 0 };
    let mat = material();

    tally.check("mesh: conformity and area conservation", (|| {
        let square = generate_square_mesh::<f64>(32, &[Side::Bottom]);
        let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
        let hole = generate_hole_mesh::<f64>(64, &[disk], &[Side::Bottom], 0.1)
            .map_err(|e| e.to_string())?;
        square.audit().map_err(|e| e.to_string())?;
        hole.audit().map_err(|e| e.to_string())?;
        ensure(
            (square.total_area() - 4.0).abs() < 1e-12 && hole.total_area() < 4.0,
            "area mismatch",
        )
    })());

    tally.check("mesh: bisection closure and exact prolongation", (|| {
        let mesh = generate_square_mesh::<f64>(8, &[Side::Bottom]);
        let marked: std::collections::BTreeSet<usize> = [0, 17, 40, 41].into_iter().collect();
        let (refined, prolong) = refine(&mesh, &marked);
        refined.audit().map_err(|e| e.to_string())?;
        let field = NodalField::scalar(pseudo_random(mesh.num_vertices(), 1, -1.0, 1.0));
        let lifted = prolong.apply(&field);
        let back = interpolate_nodal(&refined, &lifted, &mesh).map_err(|e| e.to_string())?;
        let gap = field
            .data
            .iter()
            .zip(&back.field.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        ensure(gap < 1e-12, &format!("prolongation gap {gap}"))
    })());

    tally.check("elasticity: symmetry and ersatz bounds", (|| {
        let mesh = generate_square_mesh::<f64>(12, &[Side::Bottom]);
        let v = NodalField::scalar(pseudo_random(mesh.num_vertices(), 2, 0.0, 1.0));
        let assembler = ElasticityAssembler::new(&mesh);
        let k = assembler.assemble(&mesh, mat, &ersatz_factors(&mesh, &v, 1e-2).unwrap());
        ensure(k.symmetry_defect() < 1e-14, "asymmetric stiffness")
    })());

    tally.check("elasticity: work identity", (|| {
        let mesh = generate_square_mesh::<f64>(16, &[Side::Bottom]);
        let v = NodalField::scalar(pseudo_random(mesh.num_vertices(), 3, 0.0, 1.0));
        let g = LinearTraction::radial();
        let u = solve_neumann_state(&mesh, mat, 1e-2, &v, &g).map_err(|e| e.to_string())?;
        let s = ersatz_factors(&mesh, &v, 1e-2).unwrap();
        let energy = 2.0 * elastic_energy(&mesh, mat, &s, &u);
        let work = surface_work(&mesh, &g, &u);
        let rel = (energy - work).abs() / work.abs().max(1.0);
        ensure(rel <= 1e-8, &format!("relative gap {rel:e}"))
    })());

    tally.check("functional: decomposition identity and zero-residual oracle", (|| {
        let mesh = generate_square_mesh::<f64>(16, &[Side::Bottom]);
        let v = NodalField::scalar(pseudo_random(mesh.num_vertices(), 4, 0.0, 1.0));
        let g = LinearTraction::radial();
        let u_n = solve_neumann_state(&mesh, mat, 1e-2, &v, &g).map_err(|e| e.to_string())?;
        let f: DirichletData<f64> =
            mesh.sigma_n_vertices().iter().map(|&vx| (vx, u_n.vec2(vx))).collect();
        let u_d = solve_dirichlet_state(&mesh, mat, 1e-2, &v, &f).map_err(|e| e.to_string())?;
        let s = ersatz_factors(&mesh, &v, 1e-2).unwrap();
        let kv = kv_value(&mesh, mat, &s, &u_n, &u_d);
        let sum = elastic_energy(&mesh, mat, &s, &u_n) + elastic_energy(&mesh, mat, &s, &u_d)
            + jnd_constant(&mesh, &g, &f);
        let rel = (kv - sum).abs() / kv.abs().max(1.0);
        ensure(kv <= 1e-9 && rel <= 1e-8, &format!("kv {kv:e}, decomposition gap {rel:e}"))
    })());

    tally.check("functional: gradient matches finite differences", (|| {
        let mesh = generate_square_mesh::<f64>(8, &[Side::Bottom]);
        let band: std::collections::BTreeSet<usize> = mesh.inner_band(0.1).into_iter().collect();
        let mask = |i: usize, x: f64| if band.contains(&i) { 0.0 } else { x };
        let v = NodalField::scalar(
            pseudo_random(mesh.num_vertices(), 5, 0.2, 0.8)
                .into_iter()
                .enumerate()
                .map(|(i, x)| mask(i, x))
                .collect(),
        );
        let theta: Vec<f64> = pseudo_random(mesh.num_vertices(), 6, -1.0, 1.0)
            .into_iter()
            .enumerate()
            .map(|(i, x)| mask(i, x))
            .collect();
        let (gamma, epsilon, delta) = (1e-1, 1.0 / (16.0 * std::f64::consts::PI), 1e-2);
        let g = LinearTraction::radial();
        let f: DirichletData<f64> = mesh
            .sigma_n_vertices()
            .iter()
            .map(|&vx| {
                let p = mesh.vertex(vx);
                (vx, [0.5 * p.x, -0.2 * p.y])
            })
            .collect();
        let objective = |v: &NodalField<f64>| -> f64 {
            let s = ersatz_factors(&mesh, v, delta).unwrap();
            let u_n = solve_neumann_state(&mesh, mat, delta, v, &g).unwrap();
            let u_d = solve_dirichlet_state(&mesh, mat, delta, v, &f).unwrap();
            let (mg, mp) = mm_value(&mesh, v, gamma, epsilon);
            elastic_energy(&mesh, mat, &s, &u_n) + elastic_energy(&mesh, mat, &s, &u_d)
                + jnd_constant(&mesh, &g, &f) + mg + mp
        };
        let u_n = solve_neumann_state(&mesh, mat, delta, &v, &g).unwrap();
        let u_d = solve_dirichlet_state(&mesh, mat, delta, &v, &f).unwrap();
        let d = driving_term(&mesh, mat, delta, &[StatePair { u_n: &u_n, u_d: &u_d }]);
        let ops = scalar_operators(&mesh);
        let predicted = gradient_action(&ops, &v, &theta, &d, gamma, epsilon);
        let t = 1e-4;
        let perturbed = |sign: f64| {
            NodalField::scalar(
                v.data.iter().zip(&theta).map(|(&vi, &ti)| vi + sign * t * ti).collect(),
            )
        };
        let fd = (objective(&perturbed(1.0)) - objective(&perturbed(-1.0))) / (2.0 * t);
        let rel = (predicted - fd).abs() / fd.abs().max(1e-12);
        ensure(rel <= 1e-4, &format!("relative error {rel:e}"))
    })());

    tally.check("pdas: agrees with projected Gauss-Seidel", (|| {
        let mut ok = true;
        let mut why = String::new();
        for case in 0..3u64 {
            let n = 60 + 20 * case as usize;
            let diag = pseudo_random(n, 10 + case, 1.5, 3.0);
            let off = pseudo_random(n - 1, 20 + case, -0.7, 0.7);
            let cols: Vec<Vec<usize>> = (0..n)
                .map(|i| {
                    let mut c = vec![i];
                    if i > 0 {
                        c.insert(0, i - 1);
                    }
                    if i + 1 < n {
                        c.push(i + 1);
                    }
                    c
                })
                .collect();
            let mut a = CsrMatrix::from_pattern(cols);
            for i in 0..n {
                a.add_at(i, i, diag[i]);
                if i > 0 {
                    a.add_at(i, i - 1, off[i - 1]);
                }
                if i + 1 < n {
                    a.add_at(i, i + 1, off[i]);
                }
            }
            let b = pseudo_random(n, 30 + case, -2.0, 2.0);
            let qp = ObstacleQP::boxed(a, b, vec![0, 1]);
            let init = vec![0.5; n];
            let (v, cert, outer) = pdas_solve(&qp, None, &init, 100).map_err(|e| e.to_string())?;
            let oracle =
                projected_gauss_seidel(&qp, 1e-13, 1_000_000).map_err(|e| e.to_string())?;
            let gap = v.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            if !(cert.is_valid() && outer <= 30 && gap <= 1e-8) {
                ok = false;
                why = format!("case {case}: gap {gap:e}, outer {outer}");
                break;
            }
        }
        ensure(ok, &why)
    })());

    tally.check("inversion: determinism over five steps", (|| {
        let run_once = || -> std::result::Result<Vec<u64>, String> {
            let coarse = generate_square_mesh::<f64>(10, &[Side::Bottom]);
            let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
            let (generated, _) = generate_measurements(
                &[disk],
                mat,
                &[LinearTraction::radial(), LinearTraction::counter_diagonal()],
                30,
                &coarse,
                &[Side::Bottom],
                0.1,
                &NoiseSpec::none(9),
            )
            .map_err(|e| e.to_string())?;
            let mut cfg = InversionConfig::table_defaults(mat);
            cfg.gamma = 5e-2;
            let mut inv = Inversion::new(coarse, cfg, generated.measurements, None)
                .map_err(|e| e.to_string())?;
            let mut bits = Vec::new();
            for _ in 0..5 {
                let (row, _) = inv.advance().map_err(|e| e.to_string())?;
                bits.push(row.energy.total.to_bits());
                bits.push(row.step_norm.to_bits());
            }
            Ok(bits)
        };
        let a = run_once()?;
        let b = run_once()?;
        ensure(a == b, "histories differ")
    })());

    if tally.failures > 0 {
        bail!("{} self-test check(s) failed", tally.failures);
    }
    println!("all self-test checks passed");
    Ok(())
}
