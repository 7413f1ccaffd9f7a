// temporary rehearsal: desk-scale circular-cavity reconstruction
use kv2d::elasticity::{IsotropicMaterial, LinearTraction};
use kv2d::geom::ShapeSpec;
use kv2d::inversion::{jaccard, thresholded_centroid, Inversion, InversionConfig, Progress};
use kv2d::mesh::{generate_square_mesh, Side};
use kv2d::synthdata::{generate_measurements, NoiseSpec};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(24);
    let gamma: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-1);
    let max_iter: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20000);
    let n_ref: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(800);

    let material = IsotropicMaterial::new(0.5, 1.0).unwrap();
    let disk = ShapeSpec::Disk { center: [0.0, 0.0], r: 0.3 };
    let coarse = generate_square_mesh::<f64>(n, &[Side::Bottom]);
    let start = Instant::now();
    let (gen, _) = generate_measurements(
        &[disk.clone()],
        material,
        &[LinearTraction::radial(), LinearTraction::counter_diagonal()],
        4 * n,
        &coarse,
        &[Side::Bottom],
        0.1,
        &NoiseSpec::none(1),
    )
    .unwrap();
    println!("forward data: {:.1?}", start.elapsed());

    let mut cfg = InversionConfig::table_defaults(material);
    cfg.gamma = gamma;
    cfg.max_iterations = max_iter;
    cfg.n_ref = n_ref;
    let mut inv = Inversion::new(coarse, cfg, gen.measurements, None).unwrap();
    let t0 = Instant::now();
    let mut last_print = Instant::now();
    loop {
        let (row, progress) = inv.advance().unwrap();
        if last_print.elapsed().as_secs() >= 5 || progress != Progress::Continuing {
            let j = jaccard(inv.mesh(), inv.phase(), &[disk.clone()], 0.5);
            let c = thresholded_centroid(inv.mesh(), inv.phase(), 0.5);
            println!(
                "n {:5} tau {:8.2e} J {:11.5e} norm {:8.2e} jac {:.3} centroid {:?} nv {} [{:.1?}]",
                row.n, row.tau, row.energy.total, row.step_norm, j,
                c.map(|p| (p.x, p.y)), inv.mesh().num_vertices(), t0.elapsed()
            );
            last_print = Instant::now();
        }
        if progress != Progress::Continuing {
            println!("done: {:?} at n={} rejections={} refinements={:?} elapsed {:.1?}",
                progress, inv.iteration, inv.rejected_steps, inv.refined_at, t0.elapsed());
            break;
        }
    }
    let j = jaccard(inv.mesh(), inv.phase(), &[disk], 0.5);
    println!("final jaccard {j:.4}");
}
