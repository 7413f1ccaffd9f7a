// temporary: magnitude of the KV driving term at v = 0 vs the potential drive
use kv2d::elasticity::{IsotropicMaterial, LinearTraction};
use kv2d::functional::driving_term_parts;
use kv2d::functional::StatePair;
use kv2d::geom::ShapeSpec;
use kv2d::mesh::{generate_square_mesh, NodalField, Side};
use kv2d::synthdata::{generate_measurements, NoiseSpec};
use kv2d::elasticity::{solve_neumann_state, solve_dirichlet_state, scalar_operators};

fn main() {
    let material = IsotropicMaterial::new(0.5, 1.0).unwrap();
    let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(24);
    let coarse = generate_square_mesh::<f64>(n, &[Side::Bottom]);
    let (gen, _) = generate_measurements(
        &[disk],
        material,
        &[LinearTraction::radial(), LinearTraction::counter_diagonal()],
        4 * n, &coarse, &[Side::Bottom], 0.1, &NoiseSpec::none(1),
    ).unwrap();
    let delta = 1e-2;
    let v = NodalField::scalar(vec![0.0; coarse.num_vertices()]);
    let mut pairs_data = Vec::new();
    for m in &gen.measurements {
        let un = solve_neumann_state(&coarse, material, delta, &v, &m.g).unwrap();
        let f = m.dirichlet_data(&coarse);
        let ud = solve_dirichlet_state(&coarse, material, delta, &v, &f).unwrap();
        pairs_data.push((un, ud));
    }
    let pairs: Vec<StatePair<f64>> = pairs_data.iter().map(|(a, b)| StatePair { u_n: a, u_d: b }).collect();
    let (dn, dd) = driving_term_parts(&coarse, material, delta, &pairs);
    let ops = scalar_operators(&coarse);
    // per-node comparison: -d_i vs (gamma/eps) m_i ; report the ratio -d_i / m_i
    let mut best = (0.0f64, 0usize);
    let mut inside_ratios = Vec::new();
    for i in 0..coarse.num_vertices() {
        let d = dn[i] + dd[i];
        let ratio = -d / ops.lumped_mass[i];
        if ratio > best.0 { best = (ratio, i); }
        let p = coarse.vertex(i);
        if p.x * p.x + p.y * p.y < 0.09 { inside_ratios.push(ratio); }
    }
    inside_ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("max drive ratio (-d/m): {:.3} at vertex {} ({:?})", best.0, best.1, coarse.vertex(best.1));
    println!("inside-disk drive ratios: min {:.3} median {:.3} max {:.3}",
        inside_ratios[0], inside_ratios[inside_ratios.len()/2], inside_ratios[inside_ratios.len()-1]);
    let eps = 1.0 / (16.0 * std::f64::consts::PI);
    for gamma in [1e-1, 5e-2, 1e-2] {
        println!("gamma {gamma:7.0e}: potential threshold gamma/eps = {:.3}", gamma / eps);
    }
}
