//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Heavy criteria share one flagship surface/path build and serialize on a
//! mutex so their runtime measurements mean something on a loaded machine.

use anosov::certify::{certify_theorem3, growth_lemma_check, CertifyOptions};
use anosov::deform::{build_path, default_rho_grid, solve_poisson, verify_path_properties, DeformationPath};
use anosov::mesh::{build_mesh, MeshError, MeshParams};
use anosov::ode::DEFAULT_TOL;
use anosov::profiles::{certify_theorem1, kplus_bound_theorem3, FamilyParams};
use anosov::report;
use anosov::riccati::{integrate_jacobi, ConstantCurvature, JacobiState};
use anosov::surface::{calibrate_amplitudes, Bump, BubbledSurface, QUAD_RES};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

fn flagship() -> &'static (BubbledSurface, DeformationPath) {
    static CELL: OnceLock<(BubbledSurface, DeformationPath)> = OnceLock::new();
    CELL.get_or_init(|| {
        let base = BubbledSurface::new(
            vec![Bump { x: 0.0, y: 0.0, delta: 0.05, amplitude: 1e-4 }],
            0.5,
            7,
        )
        .unwrap();
        let target = 0.9 * kplus_bound_theorem3(0.5, 0.05, 0.0);
        let surface = calibrate_amplitudes(&base, target).unwrap();
        let path = build_path(&surface, &MeshParams::default(), default_rho_grid()).unwrap();
        assert!(
            surface.measured_kplus() < kplus_bound_theorem3(0.5, 0.05, path.mu),
            "flagship surface admissible with the run's mu"
        );
        (surface, path)
    })
}

#[test]
fn criterion_1_closed_form_riccati_agreement() {
    let start = Instant::now();
    for eps in [0.25f64, 1.0] {
        let sol = integrate_jacobi(
            &ConstantCurvature(-eps),
            JacobiState::new(0.0, 1.0, 0.0),
            10.0,
            DEFAULT_TOL,
        )
        .unwrap();
        let mut sup = 0.0f64;
        for j in 0..=10_000 {
            let t = 10.0 * j as f64 / 10_000.0;
            let exact = eps.sqrt() * (eps.sqrt() * t).tanh();
            sup = sup.max((sol.riccati_at(t) - exact).abs());
        }
        assert!(sup <= 1e-8, "eps = {eps}: sup-norm {sup:.3e} (tol 1e-8)");
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "runtime {dt:?} (limit 1 s)");
    println!("criterion 1: PASS (sup-norm <= 1e-8 on [0,10], eps in {{0.25, 1}}; {dt:?})");
}

#[test]
fn criterion_2_lambda_formula_boundary() {
    let start = Instant::now();
    let lam = 0.5 * 3f64.ln();
    let sol = integrate_jacobi(
        &ConstantCurvature(-1.0),
        JacobiState::new(0.0, 1.0, 1e-6),
        lam,
        DEFAULT_TOL,
    )
    .unwrap();
    let exit = sol.riccati_at(lam);
    assert!(
        (0.5 - 1e-3..=0.5 + 1e-3).contains(&exit),
        "exit U = {exit} outside [0.499, 0.501]"
    );
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 1.0, "runtime {dt:?} (limit 1 s)");
    println!("criterion 2: PASS (exit U = {exit:.9} in [0.5 +- 1e-3]; {dt:?})");
}

fn run_criterion_3() -> anosov::profiles::AnosovProfileReport {
    let params = FamilyParams::new(0.5, 0.1, 3, 1.5, 0.5).unwrap();
    let rep = certify_theorem1(params, 100, 0xF1A6_5417, &Default::default()).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.verdicts.len(), 100);
    for v in &rep.verdicts {
        assert!(v.min_unstable >= -1e-8, "profile {}: min U^u {}", v.index, v.min_unstable);
        assert!(v.max_stable <= 1e-8, "profile {}: max U^s {}", v.index, v.max_stable);
        assert!(
            v.separation >= 2.0 * 0.28125 - 1e-3,
            "profile {}: separation {}",
            v.index,
            v.separation
        );
    }
    rep
}

#[test]
fn criterion_3_theorem1_profile_certification() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let rep = run_criterion_3();
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 60.0, "runtime {dt:?} (limit 60 s)");
    let worst = rep.worst().unwrap();
    println!(
        "criterion 3: PASS (100 profiles; worst separation {:.6} >= {:.6}; {dt:?})",
        worst.separation,
        2.0 * 0.28125 - 1e-3
    );
}

#[test]
fn criterion_4_surface_gauss_bonnet() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let (surface, _) = flagship();
    let four_pi = 4.0 * std::f64::consts::PI;
    let e1 = (surface.total_curvature(QUAD_RES.0, QUAD_RES.1) + four_pi).abs() / four_pi;
    let e2 = (surface.total_curvature(2 * QUAD_RES.0, 2 * QUAD_RES.1) + four_pi).abs() / four_pi;
    assert!(e1 <= 1e-3, "default-resolution error {e1:.3e} (tol 1e-3)");
    let ratio = e2 / e1;
    assert!(
        ratio >= 0.4 && ratio <= 0.6,
        "doubling the resolution scaled the error by {ratio:.3} (expected 0.5 +- 20%)"
    );
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "runtime {dt:?} (limit 30 s)");
    println!("criterion 4: PASS (GB rel err {e1:.3e} <= 1e-3, halving ratio {ratio:.3}; {dt:?})");
}

#[test]
fn criterion_5_poisson_pipeline() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let bare = BubbledSurface::new(vec![], 0.5, 0).unwrap();
    let mesh = build_mesh(&bare, &MeshParams::default()).unwrap();
    // Manufactured solution: discrete forcing of a smooth chart field.
    let w0: Vec<f64> =
        mesh.positions.iter().map(|p| (2.0 * p.re).cos() * (1.5 * p.im).sin()).collect();
    let mut lw = vec![0.0; mesh.n_vertices()];
    mesh.stiffness_apply(&w0, &mut lw);
    let h: Vec<f64> = lw.iter().zip(&mesh.mass).map(|(v, m)| v / m).collect();
    let sol = solve_poisson(&mesh, &h).unwrap();
    let min0 = w0.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = w0.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let err = w0
        .iter()
        .zip(&sol.w)
        .map(|(a, b)| (a - min0 - b).abs())
        .fold(0.0f64, f64::max)
        / scale;
    assert!(err <= 1e-6, "manufactured-solution recovery error {err:.3e} (tol 1e-6)");

    // Negative control: a constant right-hand side is orthogonal to the
    // range; the iteration must stall above 1e-3.
    let constant = vec![1.0; mesh.n_vertices()];
    let stall = match mesh.cg_solve(&constant, 1e-10, 40_000) {
        Err(MeshError::NoConvergence { residual, .. }) => residual,
        other => panic!("inconsistent system must stall, got {other:?}"),
    };
    assert!(stall > 1e-3, "stalled residual {stall:.3e} (must stay above 1e-3)");
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "runtime {dt:?} (limit 30 s)");
    println!(
        "criterion 5: PASS (recovery err {err:.3e} <= 1e-6, negative control stalls at {stall:.3e}; {dt:?})"
    );
}

fn run_criterion_6() -> anosov::deform::PathReport {
    let (surface, path) = flagship();
    assert_eq!(path.rho_grid.len(), 11);
    let report = verify_path_properties(surface, path).unwrap();
    assert!(report.pass);
    // K_1 < 0 at every vertex is folded into P4; double-check explicitly.
    let k1 = path.curvature_of_deformed(surface, 1.0).unwrap();
    assert!(k1.iter().all(|&k| k < 0.0), "K_1 strictly negative everywhere");
    report
}

#[test]
fn criterion_6_deformation_properties() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let report = run_criterion_6();
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 120.0, "runtime {dt:?} (limit 2 min)");
    let last = report.rows.last().unwrap();
    println!(
        "criterion 6: PASS (P1-P5 over 11 rho values; K_1 max {:.6} < 0; {dt:?})",
        last.k_max
    );
}

fn certify_options() -> CertifyOptions {
    CertifyOptions::default()
}

fn run_criterion_7() -> anosov::certify::AnosovCertificate {
    let (surface, path) = flagship();
    let cert = certify_theorem3(surface, path, 200, 0xA5_0B57, &certify_options()).unwrap();
    assert!(cert.pass);
    assert_eq!(cert.rows.len(), 11);
    for row in &cert.rows {
        assert!(row.min_unstable >= -1e-8, "rho {}: min U^u {}", row.rho, row.min_unstable);
        assert!(row.max_stable <= 1e-8, "rho {}: max U^s {}", row.rho, row.max_stable);
        assert!(
            row.min_separation >= row.separation_floor - 1e-3,
            "rho {}: separation {} < floor {} - 1e-3",
            row.rho,
            row.min_separation,
            row.separation_floor
        );
        assert!(row.max_cauchy_gap <= 1e-6, "rho {}: cauchy gap {}", row.rho, row.max_cauchy_gap);
    }
    cert
}

#[test]
fn criterion_7_theorem3_end_to_end() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();
    let cert = run_criterion_7();
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 600.0, "runtime {dt:?} (limit 10 min)");
    let worst = cert
        .rows
        .iter()
        .min_by(|a, b| a.min_separation.total_cmp(&b.min_separation))
        .unwrap();
    println!(
        "criterion 7: PASS (200 geodesics x 11 rho; mu = {:.4e}; worst separation {:.6} >= {:.6} - 1e-3; {dt:?})",
        cert.mu, worst.min_separation, worst.separation_floor
    );
}

#[test]
fn criterion_8_determinism() {
    let _guard = SERIAL.lock().unwrap();
    let start = Instant::now();

    let rep_a = run_criterion_3();
    let rep_b = run_criterion_3();
    let (txt_a, csv_a) = report::render_profile_report(&rep_a);
    let (txt_b, csv_b) = report::render_profile_report(&rep_b);
    assert_eq!(txt_a, txt_b, "criterion 3 report bytes differ");
    assert_eq!(csv_a, csv_b, "criterion 3 margin CSV bytes differ");

    let (surface, path) = flagship();
    let prop_a = run_criterion_6();
    let prop_b = run_criterion_6();
    let (da, ca, wa) = report::render_deformation_report(surface, path, &prop_a);
    let (db, cb, wb) = report::render_deformation_report(surface, path, &prop_b);
    assert_eq!(da, db, "criterion 6 report bytes differ");
    assert_eq!(ca, cb, "criterion 6 extrema CSV bytes differ");
    assert_eq!(wa, wb, "criterion 6 w-field CSV bytes differ");

    let cert_a = run_criterion_7();
    let cert_b = run_criterion_7();
    let growth: Vec<_> = path
        .rho_grid
        .iter()
        .map(|&rho| {
            growth_lemma_check(surface, Some(path), rho, 8, 0xA5_0B57, &certify_options()).unwrap()
        })
        .collect();
    let (ta, ma) = report::render_certificate(&cert_a, &growth);
    let (tb, mb) = report::render_certificate(&cert_b, &growth);
    assert_eq!(ta, tb, "criterion 7 certificate bytes differ");
    assert_eq!(ma, mb, "criterion 7 margin CSV bytes differ");

    let dt = start.elapsed();
    println!("criterion 8: PASS (criteria 3, 6, 7 reports byte-identical across reruns; {dt:?})");
}
