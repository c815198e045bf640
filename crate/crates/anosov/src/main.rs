//! Command-line driver: build surfaces, verify profile certificates, run
//! the deformation, certify hyperbolicity, and sweep the curvature bounds.
//!
//! Exit codes: 0 = all checks passed, 1 = a certificate or verification
//! failed, 2 = configuration or usage error.

use anosov::certify::{certify_theorem3, growth_lemma_check, CertifyOptions};
use anosov::config::RunConfig;
use anosov::deform::{build_path, verify_length_monotonicity, verify_path_properties};
use anosov::mesh::MeshParams;
use anosov::profiles::{certify_theorem1, kplus_bound_theorem3, CertifyOptions as ProfileOptions};
use anosov::report;
use anosov::riccati::PairOptions;
use anosov::surface::{
    bubble_separation_stats, calibrate_amplitudes, stratified_states, Bump, BubbledSurface,
    SurfaceDiagnostics, QUAD_RES,
};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "anosov", version, about = "Riccati certificates for geodesic flows on bubbled hyperbolic surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports, tables, and figures.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for all randomized sampling.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the profile-level hyperbolicity bounds on random profiles.
    ProfileVerify {
        #[command(flatten)]
        common: Common,
        /// Number of random profiles.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Build and calibrate a bubbled surface, with embedded diagnostics.
    SurfaceBuild {
        #[command(flatten)]
        common: Common,
    },
    /// Solve for the conformal factor and verify the path properties.
    Deform {
        #[command(flatten)]
        common: Common,
        /// Surface file produced by surface-build.
        #[arg(long)]
        surface: PathBuf,
        /// Comma-separated ascending ρ values in [0, 1].
        #[arg(long)]
        rho_grid: Option<String>,
        /// Far-field mesh edge length.
        #[arg(long)]
        mesh_res: Option<f64>,
    },
    /// End-to-end certificate along the deformation path.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        rho_grid: Option<String>,
        #[arg(long)]
        mesh_res: Option<f64>,
        /// Stable/unstable horizon T.
        #[arg(long)]
        horizon: Option<f64>,
        /// Number of stratified geodesics.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Emit the admissible-curvature bound tables over an (ε, δ) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Conformal exponent bound μ used in the second bound.
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
    }
}

enum Failure {
    Usage(String),
    Check(String),
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(usage)?;
            RunConfig::from_toml(&text).map_err(usage)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::ProfileVerify { common, n } => {
            let cfg = load_config(&common)?;
            let p = &cfg.profile;
            let params = anosov::profiles::FamilyParams::new(
                p.epsilon,
                p.delta,
                p.k,
                p.lambda_gap,
                p.kplus,
            )
            .map_err(usage)?;
            let opts = ProfileOptions {
                sign_tol: cfg.tolerances.sign_tol,
                slack: cfg.tolerances.slack,
                pair: PairOptions {
                    convergence_tol: cfg.tolerances.convergence_tol,
                    ..Default::default()
                },
                ..Default::default()
            };
            let n = n.unwrap_or(p.n_profiles);
            match certify_theorem1(params, n, cfg.seed, &opts) {
                Ok(rep) => {
                    let (txt, csv) = report::render_profile_report(&rep);
                    write(&common.out, "profile_report.txt", &txt)?;
                    write(&common.out, "profile_margins.csv", &csv)?;
                    if let Some(worst) = rep.worst() {
                        let seed = worst.seed;
                        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                        let layout = anosov::profiles::random_layout(&params, &mut rng);
                        if let Ok(profile) = anosov::profiles::make_profile(params, &layout, seed) {
                            let (lo, hi) = profile.span();
                            if let Ok(pair) = anosov::riccati::stable_unstable_pair(
                                &profile,
                                anosov::riccati::Window::new(lo - 1.0, hi + 1.0),
                                opts.horizon_t,
                                &opts.pair,
                            ) {
                                let svg = report::render_pair_svg(
                                    &format!("worst profile (seed {seed})"),
                                    &pair,
                                );
                                write(&common.out, "worst_profile.svg", &svg)?;
                            }
                        }
                    }
                    println!("profile-verify: PASS ({n} profiles)");
                    Ok(rep.pass)
                }
                Err(e) => Err(Failure::Check(e.to_string())),
            }
        }
        Command::SurfaceBuild { common } => {
            let cfg = load_config(&common)?;
            let sc = &cfg.surface;
            let bumps: Vec<Bump> = sc
                .bumps
                .iter()
                .map(|b| Bump { x: b.x, y: b.y, delta: b.delta, amplitude: 1e-4 })
                .collect();
            // Geometric infeasibility (overlaps, boundary collisions) is a
            // failed check, not a usage error.
            let base = BubbledSurface::new(bumps, sc.epsilon, cfg.seed)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let surface = if base.bumps.is_empty() {
                base
            } else {
                let delta_max = base.bumps.iter().map(|b| b.delta).fold(0.0f64, f64::max);
                let bound = kplus_bound_theorem3(sc.epsilon, delta_max, 0.0);
                if bound <= 0.0 {
                    return Err(Failure::Usage(format!(
                        "no admissible positive curvature at delta = {delta_max}"
                    )));
                }
                calibrate_amplitudes(&base, sc.kplus_target_fraction * bound)
                    .map_err(|e| Failure::Check(e.to_string()))?
            };
            let vol = surface.volume(QUAD_RES.0, QUAD_RES.1);
            let gb = surface.total_curvature(QUAD_RES.0, QUAD_RES.1);
            let four_pi = 4.0 * std::f64::consts::PI;
            let gb_err = (gb + four_pi).abs() / four_pi;
            let stats = bubble_separation_stats(
                &surface,
                sc.separation_geodesics,
                sc.separation_horizon,
                cfg.seed,
                0.0,
            )
            .map_err(|e| Failure::Check(e.to_string()))?;
            let diagnostics = SurfaceDiagnostics {
                measured_kplus: surface.measured_kplus(),
                gauss_bonnet_error_rel: gb_err,
                volume: vol,
                min_bubble_gap: stats.min_gap,
                separation_geodesics: stats.n_geodesics,
            };
            write(&common.out, "surface.toml", &surface.to_file(diagnostics))?;
            write(&common.out, "separation.txt", &report::render_separation(&stats))?;
            // A sample trajectory dump for inspection.
            let sample = stratified_states(&surface, 1, cfg.seed)
                .into_iter()
                .next()
                .map(|(_, init)| init)
                .unwrap_or_else(|| anosov::surface::GeodesicState::new(
                    anosov::hyperbolic::C::new(0.0, 0.0),
                    0.4,
                ));
            if let Ok(traj) = anosov::surface::geodesic_flow(
                &surface,
                sample,
                20.0,
                None,
                &anosov::surface::FlowOptions::default(),
            ) {
                write(
                    &common.out,
                    "trajectory.csv",
                    &report::render_trajectory_csv(&surface, &traj, 0.01),
                )?;
            }
            println!(
                "surface-build: PASS (K+ = {:.6}, GB rel err = {:.3e}, min gap = {:.4})",
                surface.measured_kplus(),
                gb_err,
                stats.min_gap
            );
            Ok(gb_err <= 1e-3)
        }
        Command::Deform { common, surface, rho_grid, mesh_res } => {
            let cfg = load_config(&common)?;
            let (surface, _) = load_surface(&surface)?;
            let params = mesh_params(&cfg, mesh_res);
            let grid = parse_grid(&cfg, rho_grid)?;
            let path = build_path(&surface, &params, grid)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let props = verify_path_properties(&surface, &path)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let lengths = verify_length_monotonicity(&surface, &path, 16, cfg.seed)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let (txt, csv, wcsv) = report::render_deformation_report(&surface, &path, &props);
            write(&common.out, "deformation_report.txt", &txt)?;
            write(&common.out, "curvature_extrema.csv", &csv)?;
            write(&common.out, "w_field.csv", &wcsv)?;
            // Sign map of K_rho at the end of the grid.
            let rho_last = *path.rho_grid.last().unwrap();
            let k_last = path
                .curvature_of_deformed(&surface, rho_last)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let samples: Vec<(f64, f64, f64)> = path
                .mesh
                .positions
                .iter()
                .zip(&k_last)
                .map(|(p, &k)| (p.re, p.im, k))
                .collect();
            let zeta = (-2.0 * path.mu).exp() * surface.epsilon;
            let svg = report::svg_sign_heatmap(
                &format!("sign of K_rho at rho = {rho_last}"),
                &samples,
                -zeta,
            );
            write(&common.out, "curvature_signs.svg", &svg)?;
            println!(
                "deform: PASS (mu = {:.6e}, residual = {:.3e}, min length increment = {:.3e})",
                path.mu, path.poisson_residual, lengths.min_increment
            );
            Ok(props.pass)
        }
        Command::Certify { common, surface, rho_grid, mesh_res, horizon, n } => {
            let cfg = load_config(&common)?;
            let (surface, _) = load_surface(&surface)?;
            let params = mesh_params(&cfg, mesh_res);
            let grid = parse_grid(&cfg, rho_grid)?;
            let path = build_path(&surface, &params, grid)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let opts = CertifyOptions {
                horizon_t: horizon.unwrap_or(cfg.certify.horizon_t),
                window_len: cfg.certify.window_len,
                sign_tol: cfg.tolerances.sign_tol,
                slack: cfg.tolerances.slack,
                growth_samples: cfg.certify.growth_samples,
                pair: PairOptions {
                    convergence_tol: cfg.tolerances.convergence_tol,
                    sample_dt: 2e-3,
                    ..Default::default()
                },
                ..Default::default()
            };
            let n = n.unwrap_or(cfg.certify.n_geodesics);
            let cert = certify_theorem3(&surface, &path, n, cfg.seed, &opts)
                .map_err(|e| Failure::Check(e.to_string()))?;
            let mut growth = Vec::new();
            for &rho in &path.rho_grid {
                growth.push(
                    growth_lemma_check(&surface, Some(&path), rho, opts.growth_samples, cfg.seed, &opts)
                        .map_err(|e| Failure::Check(e.to_string()))?,
                );
            }
            let (txt, csv) = report::render_certificate(&cert, &growth);
            write(&common.out, "certificate.txt", &txt)?;
            write(&common.out, "certificate_margins.csv", &csv)?;
            // Plot the pair along the worst geodesic of the worst rho.
            if let Some(worst_row) = cert
                .rows
                .iter()
                .min_by(|a, b| a.min_separation.total_cmp(&b.min_separation))
            {
                let states = stratified_states(&surface, n, cfg.seed);
                if let Some((seed, init)) = states.iter().find(|(s, _)| *s == worst_row.worst_seed)
                {
                    if let Ok(c2) = anosov::certify::certify_geodesic(
                        &surface,
                        Some(&path),
                        worst_row.rho,
                        *seed,
                        init.clone(),
                        &opts,
                    ) {
                        let _ = c2;
                    }
                    // Re-derive the pair for plotting.
                    if let Ok((pair, _)) = pair_for_plot(&surface, &path, worst_row.rho, init, &opts)
                    {
                        let svg = report::render_pair_svg(
                            &format!(
                                "worst geodesic: rho = {}, seed = {}",
                                worst_row.rho, worst_row.worst_seed
                            ),
                            &pair,
                        );
                        write(&common.out, "worst_geodesic.svg", &svg)?;
                    }
                }
            }
            println!(
                "certify: {} ({} geodesics x {} rho values, mu = {:.6e})",
                if cert.pass { "PASS" } else { "FAIL" },
                n,
                path.rho_grid.len(),
                cert.mu
            );
            Ok(cert.pass)
        }
        Command::Sweep { common, mu } => {
            let eps_grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
            let delta_grid: Vec<f64> = (1..=30).map(|i| i as f64 * 0.01).collect();
            let (bounds, thresholds) = report::render_sweep(&eps_grid, &delta_grid, mu);
            write(&common.out, "kplus_bounds.csv", &bounds)?;
            write(&common.out, "delta_thresholds.csv", &thresholds)?;
            println!("sweep: wrote bound tables for {} epsilon values", eps_grid.len());
            Ok(true)
        }
    }
}

fn pair_for_plot(
    surface: &BubbledSurface,
    path: &anosov::deform::DeformationPath,
    rho: f64,
    init: &anosov::surface::GeodesicState,
    opts: &CertifyOptions,
) -> Result<(anosov::riccati::StableUnstablePair, ()), Failure> {
    use anosov::riccati::Window;
    use anosov::surface::{geodesic_flow, TrajectoryCurvature};
    let field: Option<(&dyn anosov::surface::ConformalField, f64)> = Some((&path.field, rho));
    let fwd = geodesic_flow(surface, init.clone(), opts.window_len + opts.horizon_t + 1.0, field, &opts.flow)
        .map_err(|e| Failure::Check(e.to_string()))?;
    let bwd = geodesic_flow(surface, init.clone(), -opts.horizon_t - 1.0, field, &opts.flow)
        .map_err(|e| Failure::Check(e.to_string()))?;
    struct Two<'a> {
        f: TrajectoryCurvature<'a>,
        b: TrajectoryCurvature<'a>,
    }
    impl anosov::riccati::Curvature for Two<'_> {
        fn eval(&self, t: f64) -> f64 {
            if t >= 0.0 {
                self.f.eval(t)
            } else {
                self.b.eval(t)
            }
        }
        fn domain(&self) -> anosov::riccati::Domain {
            anosov::riccati::Domain::Interval(self.b.trajectory.t1, self.f.trajectory.t1)
        }
    }
    let ks = Two {
        f: TrajectoryCurvature { surface, trajectory: &fwd, field, gb_mean: path.gb_mean },
        b: TrajectoryCurvature { surface, trajectory: &bwd, field, gb_mean: path.gb_mean },
    };
    let pair = anosov::riccati::stable_unstable_pair(
        &ks,
        Window::new(0.0, opts.window_len),
        opts.horizon_t,
        &opts.pair,
    )
    .map_err(|e| Failure::Check(e.to_string()))?;
    Ok((pair, ()))
}

fn load_surface(path: &Path) -> Result<(BubbledSurface, SurfaceDiagnostics), Failure> {
    let text = std::fs::read_to_string(path).map_err(usage)?;
    BubbledSurface::from_file(&text).map_err(usage)
}

fn mesh_params(cfg: &RunConfig, mesh_res: Option<f64>) -> MeshParams {
    let mut params =
        MeshParams { h_far: cfg.deform.mesh_h_far, near_factor: cfg.deform.mesh_near_factor };
    if let Some(h) = mesh_res {
        params.h_far = h;
    }
    params
}

fn parse_grid(cfg: &RunConfig, flag: Option<String>) -> Result<Vec<f64>, Failure> {
    match flag {
        Some(text) => RunConfig::parse_rho_grid(&text).map_err(usage),
        None => Ok(cfg.deform.rho_grid.clone()),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    report::write_file(&dir.join(name), contents).map_err(usage)?;
    Ok(())
}
