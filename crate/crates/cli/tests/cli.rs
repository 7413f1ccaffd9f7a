//! End-to-end CLI checks: exit codes, artifact round trips, resume.

use std::path::Path;
use std::process::Command;

fn kv2d() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kv2d"))
}

const SMALL_CONFIG: &str = r#"
coarse_n = 10
fine_multiplier = 3
gamma = 5e-2
max_iterations = 60
snapshot_stride = 20

[material]
mu = 0.5
lambda = 1.0

[[shape]]
kind = "disk"
center = [0.0, 0.0]
r = 0.3

[[measurement]]
g = "(x, y)"

[[measurement]]
g = "(-y, -x)"
"#;

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, SMALL_CONFIG).unwrap();
    path
}

#[test]
fn missing_config_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "coarse_n = 8\n[[measurement]]\ng = \"(x, y)\"\n").unwrap();
    let out = kv2d()
        .args(["forward", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("material"), "stderr should name the key: {stderr}");
}

#[test]
fn forward_invert_render_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let data = dir.path().join("data");
    let status = kv2d()
        .args(["forward", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(data.join("measurement_00.csv").exists());
    assert!(data.join("measurement_01.csv").exists());
    assert!(data.join("forward_mesh.vtk").exists());

    let run = dir.path().join("run");
    let out = kv2d()
        .args(["invert", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&run)
        .arg(data.join("measurement_00.csv"))
        .arg(data.join("measurement_01.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("jaccard"), "missing score line: {stdout}");
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.lines().count() >= 2);
    // strictly increasing iteration column
    let mut last = 0usize;
    for line in history.lines().skip(1) {
        let n: usize = line.split(',').next().unwrap().parse().unwrap();
        assert!(n > last);
        last = n;
    }

    let image = run.join("view.pgm");
    let status = kv2d()
        .arg("render")
        .arg(run.join("final_v.csv"))
        .arg(&image)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(image.exists());
    assert!(run.join("view.svg").exists());
}

#[test]
fn resume_reproduces_uninterrupted_history() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let data = dir.path().join("data");
    assert!(kv2d()
        .args(["forward", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap()
        .success());
    let m0 = data.join("measurement_00.csv");
    let m1 = data.join("measurement_01.csv");

    let full = dir.path().join("full");
    assert!(kv2d()
        .args(["invert", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&full)
        .arg(&m0)
        .arg(&m1)
        .status()
        .unwrap()
        .success());

    let split = dir.path().join("split");
    assert!(kv2d()
        .args(["invert", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&split)
        .args(["--max-iter", "20"])
        .arg(&m0)
        .arg(&m1)
        .status()
        .unwrap()
        .success());
    assert!(kv2d()
        .args(["invert", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&split)
        .arg("--resume")
        .arg(split.join("snapshot_000020"))
        .status()
        .unwrap()
        .success());

    let a = std::fs::read(full.join("history.csv")).unwrap();
    let b = std::fs::read(split.join("history.csv")).unwrap();
    assert_eq!(a, b, "resumed history differs from the uninterrupted run");
}

#[test]
fn selftest_passes() {
    let out = kv2d().arg("selftest").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 8);
    assert!(!stdout.contains("FAIL"));
}
