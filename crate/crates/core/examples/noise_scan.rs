// temporary: gamma/seed scan for the noisy disk
use kv2d::elasticity::{IsotropicMaterial, LinearTraction};
use kv2d::geom::ShapeSpec;
use kv2d::inversion::{jaccard, thresholded_centroid, Inversion, InversionConfig};
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
    for seed in [42u64, 7, 1234] {
        let spec = calibrate_noise(0.05, &forward, &coarse, seed).unwrap();
        let gen = apply_noise(&forward, &coarse, &spec);
        for gamma in [1e-2, 2.5e-2, 5e-2] {
            let mut cfg = InversionConfig::table_defaults(material);
            cfg.gamma = gamma;
            cfg.max_iterations = 600;
            let mut inv = Inversion::new(coarse.clone(), cfg, gen.measurements.clone(), None).unwrap();
            let progress = inv.run().unwrap();
            let j = jaccard(inv.mesh(), inv.phase(), &[disk.clone()], 0.5);
            let c = thresholded_centroid(inv.mesh(), inv.phase(), 0.5);
            let dist = c.map_or(f64::INFINITY, |p| (p.x * p.x + p.y * p.y).sqrt());
            println!(
                "seed {seed:5} gamma {gamma:7.1e}: {:?} n={:4} jac {j:.3} |centroid| {dist:.3}",
                progress, inv.iteration
            );
        }
    }
}
