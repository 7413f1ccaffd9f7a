// temporary: evolution of jaccard/centroid under noise for tau-cap variants
use kv2d::elasticity::{IsotropicMaterial, LinearTraction};
use kv2d::geom::ShapeSpec;
use kv2d::inversion::{jaccard, thresholded_centroid, Inversion, InversionConfig, Progress};
use kv2d::mesh::{generate_square_mesh, Side};
use kv2d::synthdata::{apply_noise, calibrate_noise, solve_forward_data};

fn main() {
    let n = 48;
    let material = IsotropicMaterial::new(0.5, 1.0).unwrap();
    let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
    let coarse = generate_square_mesh::<f64>(n, &[Side::Bottom]);
    let forward = solve_forward_data(
        &[disk.clone()],
        material,
        &[LinearTraction::radial(), LinearTraction::counter_diagonal()],
        4 * n, &[Side::Bottom], 0.1,
    ).unwrap();
    // (seed, gamma, tau_max, d0, max_iter)
    let variants: &[(u64, f64, f64, f64, usize)] = &[
        (7, 2.5e-2, 1e-2, 0.1, 3000),
        (7, 2.5e-2, 1e-3, 0.1, 3000),
        (7, 5.0e-2, 1e-3, 0.1, 3000),
        (42, 5.0e-2, 1e-3, 0.1, 3000),
        (7, 2.5e-2, 1e-2, 0.2, 1500),
    ];
    for &(seed, gamma, tau_max, d0, max_iter) in variants {
        let spec = calibrate_noise(0.05, &forward, &coarse, seed).unwrap();
        let gen = apply_noise(&forward, &coarse, &spec);
        let mut cfg = InversionConfig::table_defaults(material);
        cfg.gamma = gamma;
        cfg.tau_max = tau_max;
        cfg.d0 = d0;
        cfg.max_iterations = max_iter;
        let mut inv = Inversion::new(coarse.clone(), cfg, gen.measurements.clone(), None).unwrap();
        println!("--- seed {seed} gamma {gamma:.1e} tau_max {tau_max:.0e} d0 {d0} ---");
        loop {
            let (row, progress) = inv.advance().unwrap();
            if row.n % 300 == 0 || progress != Progress::Continuing {
                let j = jaccard(inv.mesh(), inv.phase(), &[disk.clone()], 0.5);
                let c = thresholded_centroid(inv.mesh(), inv.phase(), 0.5);
                let dist = c.map_or(f64::INFINITY, |p| (p.x * p.x + p.y * p.y).sqrt());
                println!("  n {:5} norm {:8.2e} jac {j:.3} |c| {dist:.3} {:?}", row.n, row.step_norm,
                    if progress != Progress::Continuing { format!("{progress:?}") } else { String::new() });
            }
            if progress != Progress::Continuing { break; }
        }
    }
}
