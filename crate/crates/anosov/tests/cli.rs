//! Exit-code contract and byte-stability of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anosov")).args(args).output().expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

#[test]
fn malformed_config_exits_2() {
    let dir = std::env::temp_dir().join("anosov-cli-bad");
    let cfg = dir.join("bad.toml");
    write(&cfg, "[profile]\ndelta = -0.5\n");
    let out = run(&[
        "profile-verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "single-line diagnostic: {err}");
}

#[test]
fn profile_verify_k0_baseline_exits_0() {
    let dir = std::env::temp_dir().join("anosov-cli-k0");
    let cfg = dir.join("cfg.toml");
    write(&cfg, "[profile]\nk = 0\nkplus = 0.0\nn_profiles = 2\n");
    let out = run(&[
        "profile-verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("out/profile_report.txt").exists());
}

#[test]
fn overlapping_bumps_exit_1() {
    let dir = std::env::temp_dir().join("anosov-cli-overlap");
    let cfg = dir.join("cfg.toml");
    write(
        &cfg,
        "[surface]\n[[surface.bumps]]\nx = 0.0\ny = 0.0\ndelta = 0.1\n\
         [[surface.bumps]]\nx = 0.02\ny = 0.0\ndelta = 0.1\n",
    );
    let out = run(&[
        "surface-build",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("0") && err.contains("1"), "offending pair named: {err}");
}

#[test]
fn sweep_is_deterministic_and_contains_frozen_row() {
    let dir = std::env::temp_dir().join("anosov-cli-sweep");
    let out1 = run(&["sweep", "--out", dir.join("a").to_str().unwrap()]);
    assert_eq!(out1.status.code(), Some(0));
    let out2 = run(&["sweep", "--out", dir.join("b").to_str().unwrap()]);
    assert_eq!(out2.status.code(), Some(0));
    let a = std::fs::read(dir.join("a/kplus_bounds.csv")).unwrap();
    let b = std::fs::read(dir.join("b/kplus_bounds.csv")).unwrap();
    assert_eq!(a, b, "sweep output is byte-stable");
    let text = String::from_utf8(a).unwrap();
    // The eps = 0.5 row reproduces kplus_bound_theorem1(0.5, 0.1).
    let row = text
        .lines()
        .find(|l| l.starts_with("5.000000000000e-1,1.000000000000e-1,"))
        .expect("eps=0.5, delta=0.1 row present");
    assert!(row.contains("9.641504294496e-1"), "row: {row}");
}

#[test]
fn full_pipeline_build_deform_certify() {
    let dir = std::env::temp_dir().join("anosov-cli-pipeline");
    let _ = std::fs::remove_dir_all(&dir);
    let cfg = dir.join("cfg.toml");
    write(
        &cfg,
        "seed = 7\n\
         [surface]\n\
         separation_geodesics = 30\n\
         separation_horizon = 10.0\n\
         [[surface.bumps]]\nx = 0.0\ny = 0.0\ndelta = 0.05\n\
         [deform]\n\
         mesh_h_far = 0.06\n\
         mesh_near_factor = 0.0625\n\
         rho_grid = [0.0, 0.5, 1.0]\n\
         [certify]\n\
         n_geodesics = 3\n\
         growth_samples = 2\n",
    );
    let cfg_arg = cfg.to_str().unwrap().to_string();

    let out = run(&[
        "surface-build",
        "--config",
        &cfg_arg,
        "--out",
        dir.join("surface").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let surface_file = dir.join("surface/surface.toml");
    assert!(surface_file.exists());

    let out = run(&[
        "deform",
        "--config",
        &cfg_arg,
        "--out",
        dir.join("deform").to_str().unwrap(),
        "--surface",
        surface_file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for f in ["deformation_report.txt", "curvature_extrema.csv", "w_field.csv", "curvature_signs.svg"] {
        assert!(dir.join("deform").join(f).exists(), "missing {f}");
    }

    let out = run(&[
        "certify",
        "--config",
        &cfg_arg,
        "--out",
        dir.join("certify").to_str().unwrap(),
        "--surface",
        surface_file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for f in ["certificate.txt", "certificate_margins.csv", "worst_geodesic.svg"] {
        assert!(dir.join("certify").join(f).exists(), "missing {f}");
    }
    let cert = std::fs::read_to_string(dir.join("certify/certificate.txt")).unwrap();
    assert!(cert.contains("verdict: PASS"), "{cert}");
}
