//! The forward / invert / render drivers.

use anyhow::{anyhow, bail, Context, Result};
use kv2d::config::RunConfig;
use kv2d::export;
use kv2d::inversion::{jaccard, thresholded_centroid, Inversion, Progress};
use kv2d::mesh::{generate_square_mesh, read_mesh, write_mesh, Mesh, NodalField};
use kv2d::synthdata::{apply_noise, calibrate_noise, solve_forward_data, NoiseSpec};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn forward(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let config = RunConfig::from_path(config_path)?;
    let seed = seed.unwrap_or(config.seed);
    std::fs::create_dir_all(out)?;

    let coarse = generate_square_mesh::<f64>(config.coarse_n, &config.sigma_d);
    let forward = solve_forward_data(
        &config.shapes,
        config.material()?,
        &config.loads()?,
        config.fine_n(),
        &config.sigma_d,
        config.d0,
    )?;
    let noise = if config.noise_level > 0.0 {
        calibrate_noise(config.noise_level, &forward, &coarse, seed)?
    } else {
        NoiseSpec::none(seed)
    };
    let generated = apply_noise(&forward, &coarse, &noise);
    println!(
        "noise: target {} amplitude {} reported {}",
        config.noise_level, noise.amplitude, generated.reported_level
    );

    for (i, m) in generated.measurements.iter().enumerate() {
        let path = out.join(format!("measurement_{i:02}.csv"));
        export::write_measurement(m, seed, noise.amplitude, &path)?;
        println!("wrote {}", path.display());
    }
    let vtk = out.join("forward_mesh.vtk");
    export::write_vtk(
        &forward.fine_mesh,
        forward.fine_states.first().map(|u| ("displacement", u)),
        &vtk,
    )?;
    println!("wrote {}", vtk.display());
    Ok(())
}

pub fn invert(
    config_path: &Path,
    out: &Path,
    measurement_files: &[std::path::PathBuf],
    seed: Option<u64>,
    max_iter: Option<usize>,
    resume: Option<&Path>,
) -> Result<()> {
    let config = RunConfig::from_path(config_path)?;
    std::fs::create_dir_all(out)?;
    let mut inv_config = config.inversion_config()?;
    if let Some(seed) = seed {
        inv_config.seed = seed;
    }
    if let Some(max_iter) = max_iter {
        inv_config.max_iterations = max_iter;
    }

    let history_path = out.join("history.csv");
    let (mut inversion, mut history_file) = match resume {
        None => {
            let measurements = measurement_files
                .iter()
                .map(|p| {
                    export::read_measurement(p)
                        .map_err(|e| anyhow!("reading measurement {}: {e}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            if measurements.is_empty() {
                bail!("no measurement files given");
            }
            let mesh = generate_square_mesh::<f64>(config.coarse_n, &config.sigma_d);
            let inversion = Inversion::new(mesh, inv_config, measurements, None)?;
            let mut file = BufWriter::new(File::create(&history_path)?);
            export::write_history_header(&mut file)?;
            (inversion, file)
        }
        Some(dir) => {
            let mesh = read_mesh::<f64>(&dir.join("mesh.kvmesh"))?;
            let snap = export::read_snapshot(&dir.join("state.kvsnap"))?;
            let measurements = (0..snap.states.len())
                .map(|i| {
                    let p = dir.join(format!("measurement_{i:02}.csv"));
                    export::read_measurement(&p)
                        .map_err(|e| anyhow!("reading measurement {}: {e}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let inversion = Inversion::restore(mesh, inv_config, measurements, snap)?;
            let file = BufWriter::new(File::options().append(true).open(&history_path)?);
            (inversion, file)
        }
    };

    let write_snapshot_dir = |inv: &mut Inversion<f64>, label: &str| -> Result<()> {
        let dir = out.join(label);
        std::fs::create_dir_all(&dir)?;
        write_mesh(inv.mesh(), &dir.join("mesh.kvmesh"))?;
        let snap = inv.snapshot()?;
        export::write_snapshot(&snap, &dir.join("state.kvsnap"))?;
        export::write_field(inv.phase(), "mesh.kvmesh", &dir.join("v.csv"))?;
        export::write_vtk(inv.mesh(), Some(("v", inv.phase())), &dir.join("v.vtk"))?;
        export::write_pgm(inv.mesh(), inv.phase(), &dir.join("v.pgm"))?;
        for (i, m) in inv.measurements().iter().enumerate() {
            export::write_measurement(m, inv.config.seed, 0.0, &dir.join(format!("measurement_{i:02}.csv")))?;
        }
        Ok(())
    };

    let _outcome = loop {
        let (row, progress) = inversion.advance()?;
        export::write_history_row(&mut history_file, &row)?;
        if row.n % config.snapshot_stride == 0 {
            history_file.flush()?;
            write_snapshot_dir(&mut inversion, &format!("snapshot_{:06}", row.n))?;
        }
        if progress != Progress::Continuing {
            break progress;
        }
    };
    history_file.flush()?;

    write_mesh(inversion.mesh(), &out.join("final_mesh.kvmesh"))?;
    export::write_field(inversion.phase(), "final_mesh.kvmesh", &out.join("final_v.csv"))?;
    export::write_vtk(inversion.mesh(), Some(("v", inversion.phase())), &out.join("final_v.vtk"))?;
    export::write_pgm(inversion.mesh(), inversion.phase(), &out.join("final_v.pgm"))?;
    export::write_contour_svg(
        inversion.mesh(),
        inversion.phase(),
        &config.shapes,
        &out.join("final_v.svg"),
    )?;

    println!(
        "converged = {} after {} iterations ({} rejected steps, {} refinements)",
        inversion.converged,
        inversion.iteration,
        inversion.rejected_steps,
        inversion.refined_at.len()
    );
    if !config.shapes.is_empty() {
        let score = jaccard(inversion.mesh(), inversion.phase(), &config.shapes, 0.5);
        println!("jaccard(v >= 0.5, truth) = {score}");
        if let Some(c) = thresholded_centroid(inversion.mesh(), inversion.phase(), 0.5) {
            println!("centroid(v >= 0.5) = ({}, {})", c.x, c.y);
        }
    }
    Ok(())
}

pub fn render(
    field_path: &Path,
    out: &Path,
    mesh_override: Option<&Path>,
    config_path: Option<&Path>,
) -> Result<()> {
    let (field, mesh_ref) = export::read_field(field_path)?;
    let mesh_path = match mesh_override {
        Some(p) => p.to_path_buf(),
        None => {
            let name = mesh_ref
                .ok_or_else(|| anyhow!("field file has no mesh reference; pass --mesh"))?;
            field_path.parent().unwrap_or(Path::new(".")).join(name)
        }
    };
    let mesh: Mesh<f64> = read_mesh(&mesh_path)
        .with_context(|| format!("reading mesh {}", mesh_path.display()))?;
    let scalar = match field.ncomp {
        1 => field,
        // vector fields render by magnitude
        _ => NodalField::scalar(
            (0..field.num_vertices())
                .map(|v| {
                    let vals = field.at(v);
                    (vals[0] * vals[0] + vals[1] * vals[1]).sqrt()
                })
                .collect(),
        ),
    };
    export::write_pgm(&mesh, &scalar, out)?;
    let truth = match config_path {
        Some(p) => RunConfig::from_path(p)?.shapes,
        None => Vec::new(),
    };
    let svg = out.with_extension("svg");
    export::write_contour_svg(&mesh, &scalar, &truth, &svg)?;
    println!("wrote {} and {}", out.display(), svg.display());
    Ok(())
}
