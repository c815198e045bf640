//! Report, CSV, and SVG emission.
//!
//! Everything written here is byte-stable for fixed inputs: numbers go
//! through fixed-precision scientific formatting, rows follow input order,
//! and each checked quantity is printed next to the tolerance it was
//! checked against.

use crate::certify::{AnosovCertificate, GrowthReport};
use crate::deform::{DeformationPath, PathReport};
use crate::profiles::{
    kplus_bound_theorem1, kplus_bound_theorem3, delta_threshold_theorem1,
    delta_threshold_theorem3, AnosovProfileReport,
};
use crate::riccati::StableUnstablePair;
use crate::surface::{BubbledSurface, SeparationStats, Trajectory};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        format!("{v}")
    }
}

/// Line/scatter plot of one or two series as a standalone SVG.
pub fn svg_line_plot(title: &str, series: &[(&str, &[(f64, f64)])]) -> String {
    const W: f64 = 860.0;
    const H: f64 = 480.0;
    const M: f64 = 55.0;
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in series {
        for &(x, y) in *pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !x0.is_finite() || x1 <= x0 {
        x0 = 0.0;
        x1 = 1.0;
    }
    if !y0.is_finite() || y1 <= y0 {
        y0 -= 0.5;
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"monospace\" font-size=\"15\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    );
    let _ = write!(
        svg,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M,
        H - M
    );
    for tick in 0..=4 {
        let fx = x0 + (x1 - x0) * tick as f64 / 4.0;
        let fy = y0 + (y1 - y0) * tick as f64 / 4.0;
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>\n",
            sx(fx),
            H - M + 18.0,
            fx
        );
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
            M - 6.0,
            sy(fy) + 4.0,
            fy
        );
    }
    for (idx, (label, pts)) in series.iter().enumerate() {
        let color = colors[idx % colors.len()];
        let mut path = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = write!(svg, "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.4\"/>\n");
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            W - M - 150.0,
            M + 16.0 * (idx + 1) as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Sign-region heat map of a scalar field sampled on a grid of chart points.
pub fn svg_sign_heatmap(
    title: &str,
    samples: &[(f64, f64, f64)],
    threshold_neg: f64,
) -> String {
    const W: f64 = 640.0;
    let scale = W / 1.75;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{}\" viewBox=\"0 0 {W} {}\">\n\
         <rect width=\"{W}\" height=\"{}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        W + 30.0,
        W + 30.0,
        W + 30.0,
        W / 2.0
    );
    for &(x, y, v) in samples {
        let px = (x + 0.875) * scale;
        let py = (0.875 - y) * scale + 30.0;
        let color = if v >= 0.0 {
            "#c62828"
        } else if v >= threshold_neg {
            "#ff9800"
        } else {
            "#1565c0"
        };
        let _ = write!(svg, "<rect x=\"{px:.1}\" y=\"{py:.1}\" width=\"3.1\" height=\"3.1\" fill=\"{color}\"/>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

/// Profile-level certification report: text + per-profile CSV.
pub fn render_profile_report(report: &AnosovProfileReport) -> (String, String) {
    let mut txt = String::new();
    let p = &report.params;
    let _ = writeln!(txt, "profile certification (first-theorem regime)");
    let _ = writeln!(
        txt,
        "params: epsilon={} delta={} k={} lambda_gap={} kplus={}",
        num(p.epsilon),
        num(p.delta),
        num(p.k as f64),
        num(p.lambda_gap),
        num(p.kplus)
    );
    let _ = writeln!(
        txt,
        "kplus_bound_theorem1={} (admissible: {})",
        num(kplus_bound_theorem1(p.epsilon, p.delta)),
        p.theorem1_admissible()
    );
    let _ = writeln!(txt, "profiles: {}", report.verdicts.len());
    let _ = writeln!(txt, "horizon_T: {} (cauchy_gap tol {})", num(report.horizon_t), num(1e-6));
    let _ = writeln!(
        txt,
        "checks: min_Uu >= -{} ; max_Us <= {} ; separation >= {} - {}",
        num(report.sign_tol),
        num(report.sign_tol),
        num(report.separation_floor),
        num(report.slack)
    );
    if let Some(worst) = report.worst() {
        let _ = writeln!(
            txt,
            "worst profile: index={} seed={} separation={} (floor {} , slack {})",
            worst.index,
            worst.seed,
            num(worst.separation),
            num(report.separation_floor),
            num(report.slack)
        );
    }
    let _ = writeln!(txt, "verdict: {}", if report.pass { "PASS" } else { "FAIL" });

    let mut csv = String::from("index,seed,min_unstable,max_stable,separation,cauchy_gap,separation_floor,slack,pass\n");
    for v in &report.verdicts {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            v.index,
            v.seed,
            num(v.min_unstable),
            num(v.max_stable),
            num(v.separation),
            num(v.cauchy_gap),
            num(report.separation_floor),
            num(report.slack),
            v.pass
        );
    }
    (txt, csv)
}

/// Deformation path report: text + per-ρ extrema CSV + w dump CSV.
pub fn render_deformation_report(
    surface: &BubbledSurface,
    path: &DeformationPath,
    report: &PathReport,
) -> (String, String, String) {
    let mut txt = String::new();
    let _ = writeln!(txt, "conformal deformation path g_rho = e^(2 rho w) g");
    let _ = writeln!(txt, "epsilon: {}", num(surface.epsilon));
    let _ = writeln!(txt, "mu = max w: {} (min w = 0 by normalization)", num(path.mu));
    let _ = writeln!(txt, "gauss-bonnet mean 2*pi*chi/vol: {}", num(path.gb_mean));
    let _ = writeln!(
        txt,
        "poisson residual |Lw - Mh|/|Mh|: {} (tol {})",
        num(path.poisson_residual),
        num(1e-8)
    );
    let _ = writeln!(txt, "cg iterations: {}", path.cg_iterations);
    let _ = writeln!(txt, "h recentering shift: {}", num(path.recenter_shift));
    let _ = writeln!(txt, "mesh: {} vertices, {} triangles", path.mesh.n_vertices(), path.mesh.n_triangles());
    let _ = writeln!(txt, "rho grid: {:?}", path.rho_grid);
    let _ = writeln!(
        txt,
        "properties: P1 K_rho < -e^(-2mu)*eps outside bubbles (slack {}), P2 sign preservation,",
        num(1e-6)
    );
    let _ = writeln!(txt, "            P3 monotone decay at K >= 0, P4 K_1 < 0, P5 total curvature -4pi (rel tol {})", num(1e-3));
    let _ = writeln!(txt, "verdict: {}", if report.pass { "PASS" } else { "FAIL" });

    let mut csv = String::from("rho,k_min,k_max,k_max_outside,zeta_threshold,gauss_bonnet_rel_err,gb_tol\n");
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            num(row.rho),
            num(row.k_min),
            num(row.k_max),
            num(row.k_max_outside),
            num(row.zeta_threshold),
            num(row.gauss_bonnet_rel_err),
            num(1e-3)
        );
    }

    let mut wcsv = String::from("vertex,x,y,w\n");
    for (i, p) in path.mesh.positions.iter().enumerate() {
        let _ = writeln!(wcsv, "{},{},{},{}", i, num(p.re), num(p.im), num(path.w[i]));
    }
    (txt, csv, wcsv)
}

/// Certificate report: text + margin CSV.
pub fn render_certificate(cert: &AnosovCertificate, growth: &[GrowthReport]) -> (String, String) {
    let mut txt = String::new();
    let _ = writeln!(txt, "hyperbolicity certificate along the deformation path");
    let _ = writeln!(
        txt,
        "surface: epsilon={} delta={} bubbles={} Lambda(eps)={}",
        num(cert.epsilon),
        num(cert.delta_max),
        cert.k_bubbles,
        num(cert.lambda)
    );
    let _ = writeln!(
        txt,
        "measured K+ = {} < bound {} (mu = {})",
        num(cert.measured_kplus),
        num(cert.kplus_bound),
        num(cert.mu)
    );
    let _ = writeln!(
        txt,
        "checks per geodesic: min_Uu >= -{s} ; max_Us <= {s} ; separation >= 2*floor_thm3 - {sl} ; cauchy_gap <= {cg}",
        s = num(cert.sign_tol),
        sl = num(cert.slack),
        cg = num(1e-6)
    );
    let _ = writeln!(txt, "horizon_T: {}", num(cert.horizon_t));
    for row in &cert.rows {
        let _ = writeln!(
            txt,
            "rho={}: n={} min_Uu={} max_Us={} separation={} (floor {}) cauchy={} growth_weak_margin={} growth_strong_margin={} worst_seed={} {}",
            num(row.rho),
            row.n_geodesics,
            num(row.min_unstable),
            num(row.max_stable),
            num(row.min_separation),
            num(row.separation_floor),
            num(row.max_cauchy_gap),
            num(row.growth_margin_weak),
            num(row.growth_margin_strong),
            row.worst_seed,
            if row.pass { "PASS" } else { "FAIL" }
        );
    }
    for g in growth {
        let _ = writeln!(
            txt,
            "growth rho={}: Lambda_bar={} floors weak={} strong={} cases={} min_weak_margin={} (slack {})",
            num(g.rho),
            num(g.lambda_bar),
            num(g.floor_weak),
            num(g.floor_strong),
            g.cases.len(),
            num(g.min_margin_weak),
            num(1e-3)
        );
    }
    let _ = writeln!(txt, "verdict: {}", if cert.pass { "PASS" } else { "FAIL" });

    let mut csv = String::from(
        "rho,seed,min_unstable,max_stable,separation,floor_thm1,floor_thm3,cauchy_gap,n_bubble_intervals,pass\n",
    );
    for c in &cert.certificates {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            num(c.rho),
            c.seed,
            num(c.min_unstable),
            num(c.max_stable),
            num(c.separation),
            num(c.floor_thm1),
            num(c.floor_thm3),
            num(c.cauchy_gap),
            c.bubble_intervals.len(),
            c.pass
        );
    }
    (txt, csv)
}

/// SVG of the stable/unstable pair along one geodesic.
pub fn render_pair_svg(title: &str, pair: &StableUnstablePair) -> String {
    let u: Vec<(f64, f64)> = pair.u_unstable.samples.clone();
    let s: Vec<(f64, f64)> = pair.u_stable.samples.clone();
    svg_line_plot(title, &[("U^u", &u), ("U^s", &s)])
}

/// Trajectory dump: time, chart position, curvature, bubble membership,
/// and the running word length.
pub fn render_trajectory_csv(surface: &BubbledSurface, traj: &Trajectory, dt: f64) -> String {
    let mut csv = String::from("t,x,y,K,bubble_flag,word_length\n");
    let (lo, hi) = (traj.t0.min(traj.t1), traj.t0.max(traj.t1));
    let intervals: Vec<(f64, f64)> =
        traj.bubble_intervals().iter().map(|v| (v.enter, v.exit)).collect();
    let mut words: Vec<(f64, usize)> = traj
        .events
        .iter()
        .filter(|e| matches!(e.kind, crate::surface::FlowEventKind::Wrap { .. }))
        .map(|e| (e.t, 0usize))
        .collect();
    words.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = ((hi - lo) / dt).round() as usize;
    for j in 0..=n {
        let t = if j == n { hi } else { lo + dt * j as f64 };
        let z = traj.position(t);
        let k = surface.curvature_at(z);
        let inside = intervals.iter().any(|&(a, b)| t >= a && t <= b);
        let word_len = if traj.t1 >= traj.t0 {
            words.iter().take_while(|w| w.0 <= t).count()
        } else {
            words.iter().filter(|w| w.0 >= t).count()
        };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            num(t),
            num(z.re),
            num(z.im),
            num(k),
            inside as u8,
            word_len
        );
    }
    csv
}

/// Separation statistics block embedded in surface files and reports.
pub fn render_separation(stats: &SeparationStats) -> String {
    let mut txt = String::new();
    let _ = writeln!(txt, "separation: geodesics={} visits={}", stats.n_geodesics, stats.n_visits);
    let _ = writeln!(
        txt,
        "min_gap={} (required >= {})",
        num(stats.min_gap),
        num(stats.required_gap)
    );
    match stats.min_same_lift_gap {
        Some(g) => {
            let _ = writeln!(txt, "min_same_lift_gap={}", num(g));
        }
        None => {
            let _ = writeln!(txt, "min_same_lift_gap=none (no same-lift revisits observed)");
        }
    }
    txt
}

/// Bound sweep tables: `K+` bounds over an (ε, δ) grid plus the positivity
/// threshold curves.
pub fn render_sweep(eps_grid: &[f64], delta_grid: &[f64], mu: f64) -> (String, String) {
    let mut bounds = String::from("epsilon,delta,kplus_bound_theorem1,kplus_bound_theorem3_mu\n");
    for &e in eps_grid {
        for &d in delta_grid {
            let _ = writeln!(
                bounds,
                "{},{},{},{}",
                num(e),
                num(d),
                num(kplus_bound_theorem1(e, d)),
                num(kplus_bound_theorem3(e, d, mu))
            );
        }
    }
    let mut thresholds = String::from("epsilon,delta_threshold_theorem1,delta_threshold_theorem3_mu\n");
    for &e in eps_grid {
        let _ = writeln!(
            thresholds,
            "{},{},{}",
            num(e),
            num(delta_threshold_theorem1(e)),
            num(delta_threshold_theorem3(e, mu))
        );
    }
    (bounds, thresholds)
}

/// Write a file, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_plot_is_wellformed() {
        let pts = [(0.0, 1.0), (1.0, 0.5), (2.0, 0.8)];
        let svg = svg_line_plot("test", &[("series", &pts)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("series"));
    }

    #[test]
    fn sweep_tables_contain_frozen_value() {
        let (bounds, thresholds) = render_sweep(&[0.5], &[0.1], 0.0);
        assert!(bounds.contains("9.641504294496e-1"), "{bounds}");
        assert!(thresholds.contains("epsilon"));
    }

    #[test]
    fn trajectory_csv_has_expected_columns() {
        use crate::surface::{geodesic_flow, BubbledSurface, Bump, FlowOptions, GeodesicState};
        let s = BubbledSurface::new(
            vec![Bump { x: 0.0, y: 0.0, delta: 0.05, amplitude: 3e-4 }],
            0.5,
            0,
        )
        .unwrap();
        let init = GeodesicState::new(crate::hyperbolic::C::new(0.3, 0.0), 2.9);
        let traj = geodesic_flow(&s, init, 5.0, None, &FlowOptions::default()).unwrap();
        let csv = render_trajectory_csv(&s, &traj, 0.05);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x,y,K,bubble_flag,word_length");
        assert_eq!(csv.lines().count(), 102);
        for line in lines {
            assert_eq!(line.split(',').count(), 6);
        }
    }

    #[test]
    fn number_formatting_stable() {
        assert_eq!(num(0.28125), "2.812500000000e-1");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
