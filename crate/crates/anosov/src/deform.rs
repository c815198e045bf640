//! The conformal deformation path `g_ρ = e^{2ρw} g`.
//!
//! The conformal factor solves the Poisson problem `-Δ_g w = h` with
//! `h = -(K - 2πχ/vol)`: by Gauss–Bonnet `h` has zero mean, which is
//! exactly the solvability condition, and the solution is pinned down by
//! the normalization `min w = 0`. Under this choice the conformal curvature
//! collapses to `K_ρ = e^{-2ρw}(K + ρh)`, so the path freezes the total
//! curvature, pushes every positive-curvature point monotonically down,
//! and lands at the strictly negative `K_1 = e^{-2w} · 2πχ/vol`.
//!
//! Discretely, `w` lives on the identified octagon mesh (stiffness `L`,
//! lumped mass `M`, conjugate gradients on `L w = M h`) and is resampled
//! onto a Cartesian grid through a moving-least-squares fit, giving the
//! geodesic flow of `g_ρ` a smooth field with continuous gradients.

use crate::hyperbolic::{dist, geodesic_point, C};
use crate::mesh::{build_mesh, MeshError, MeshParams, SurfaceMesh};
use crate::surface::{
    geodesic_flow, BubbledSurface, ConformalField, FlowOptions, GeodesicState, SurfaceError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("epsilon = {epsilon} is not below -2πχ/vol = {threshold}")]
    HypothesisViolated { epsilon: f64, threshold: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("curvature formula mismatch: routes disagree by {disagreement:.3e} (tol {tol:.3e})")]
    FormulaMismatch { disagreement: f64, tol: f64 },
    #[error("path property {tag} failed at rho = {rho}, vertex {vertex}: value {value:.6e}")]
    PropertyFailed { tag: &'static str, rho: f64, vertex: usize, value: f64 },
    #[error("length monotonicity violated on curve {curve}: L({rho_hi}) - L({rho_lo}) = {diff:.3e}")]
    MonotonicityViolated { curve: usize, rho_lo: f64, rho_hi: f64, diff: f64 },
}

/// Gauss–Bonnet mean curvature `2πχ/vol` on the mesh (χ = -2).
pub fn gb_mean(mesh: &SurfaceMesh) -> f64 {
    -4.0 * std::f64::consts::PI / mesh.total_area()
}

/// The deformation source `h = -(K - 2πχ/vol)`, evaluated analytically at
/// the mesh vertices and re-centered to an exactly zero mass-weighted mean.
/// Returns the field and the re-centering shift that absorbed the
/// quadrature error.
pub fn compute_h(
    surface: &BubbledSurface,
    mesh: &SurfaceMesh,
) -> Result<(Vec<f64>, f64), DeformError> {
    let threshold = -gb_mean(mesh);
    if surface.epsilon >= threshold {
        return Err(DeformError::HypothesisViolated { epsilon: surface.epsilon, threshold });
    }
    let c = gb_mean(mesh);
    let mut h: Vec<f64> =
        mesh.positions.iter().map(|&p| -(surface.curvature_at(p) - c)).collect();
    let area = mesh.total_area();
    let shift = h.iter().zip(&mesh.mass).map(|(v, m)| v * m).sum::<f64>() / area;
    for v in h.iter_mut() {
        *v -= shift;
    }
    Ok((h, shift))
}

/// Solve `L w = M h` by conjugate gradients in the mean-zero subspace and
/// shift the solution to `min w = 0`.
pub fn solve_poisson(mesh: &SurfaceMesh, h: &[f64]) -> Result<PoissonSolution, DeformError> {
    let mut b: Vec<f64> = h.iter().zip(&mesh.mass).map(|(v, m)| v * m).collect();
    // The caller guarantees a mean-zero h; remove the float residue of that
    // mean so it cannot stall the iteration. (Genuinely inconsistent
    // right-hand sides are exercised through cg_solve directly.)
    let mean = b.iter().sum::<f64>() / mesh.total_area();
    for (bi, m) in b.iter_mut().zip(&mesh.mass) {
        *bi -= mean * m;
    }
    let h_scale = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if h_scale < 1e-13 {
        return Ok(PoissonSolution {
            w: vec![0.0; mesh.n_vertices()],
            mu: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    let out = mesh.cg_solve(&b, 1e-10, 60_000)?;
    let mut w = out.solution;
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    for v in w.iter_mut() {
        *v -= min;
    }
    let mu = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let residual = mesh.residual(&w, &b);
    Ok(PoissonSolution { w, mu, residual, iterations: out.iterations })
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub w: Vec<f64>,
    /// `μ = max w` after the `min w = 0` shift.
    pub mu: f64,
    /// `‖L w - M h‖ / ‖M h‖`.
    pub residual: f64,
    pub iterations: usize,
}

/// Smooth chart field for `w`: moving-least-squares quadric fits of the
/// vertex solution resampled onto a Cartesian grid, evaluated by bicubic
/// (Catmull–Rom) interpolation. Grid nodes outside the octagon are filled
/// through the side pairings, so the field continues smoothly across wraps.
#[derive(Debug, Clone)]
pub struct WField {
    x0: f64,
    dx: f64,
    n: usize,
    values: Vec<f64>,
}

const GRID_EXTENT: f64 = 0.85;
const GRID_N: usize = 1024;

impl WField {
    pub fn build(surface: &BubbledSurface, mesh: &SurfaceMesh, w: &[f64]) -> WField {
        let n = GRID_N;
        let x0 = -GRID_EXTENT;
        let dx = 2.0 * GRID_EXTENT / n as f64;
        let mls = MovingLeastSquares::new(mesh, w);
        let mut values = vec![0.0; (n + 1) * (n + 1)];
        for j in 0..=n {
            let y = x0 + dx * j as f64;
            for i in 0..=n {
                let x = x0 + dx * i as f64;
                let z = C::new(x, y);
                if z.norm_sqr() > 0.9 * 0.9 {
                    continue;
                }
                let (zr, _) = surface.domain.reduce(z);
                values[j * (n + 1) + i] = mls.eval(zr);
            }
        }
        WField { x0, dx, n, values }
    }

    #[inline]
    fn node(&self, i: i64, j: i64) -> f64 {
        let i = i.clamp(0, self.n as i64) as usize;
        let j = j.clamp(0, self.n as i64) as usize;
        self.values[j * (self.n + 1) + i]
    }
}

#[inline]
fn catmull_rom(p: [f64; 4], s: f64) -> (f64, f64) {
    let c0 = 2.0 * p[1];
    let c1 = p[2] - p[0];
    let c2 = 2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3];
    let c3 = -p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3];
    let v = 0.5 * (c0 + s * (c1 + s * (c2 + s * c3)));
    let d = 0.5 * (c1 + s * (2.0 * c2 + 3.0 * s * c3));
    (v, d)
}

impl ConformalField for WField {
    fn value_grad(&self, z: C) -> (f64, C) {
        let gx = (z.re - self.x0) / self.dx;
        let gy = (z.im - self.x0) / self.dx;
        let i = (gx.floor() as i64).clamp(1, self.n as i64 - 2);
        let j = (gy.floor() as i64).clamp(1, self.n as i64 - 2);
        let s = gx - i as f64;
        let t = gy - j as f64;
        let mut col = [0.0; 4];
        let mut dcol = [0.0; 4];
        for r in 0..4 {
            let row = [
                self.node(i - 1, j - 1 + r as i64),
                self.node(i, j - 1 + r as i64),
                self.node(i + 1, j - 1 + r as i64),
                self.node(i + 2, j - 1 + r as i64),
            ];
            let (v, d) = catmull_rom(row, s);
            col[r] = v;
            dcol[r] = d;
        }
        let (v, dy) = catmull_rom(col, t);
        let (dx_val, _) = catmull_rom(dcol, t);
        (v, C::new(dx_val / self.dx, dy / self.dx))
    }
}

/// Quadratic moving-least-squares fit over the mesh chart samples.
struct MovingLeastSquares<'a> {
    samples: &'a [(C, usize)],
    w: &'a [f64],
    buckets: Vec<Vec<u32>>,
    bn: usize,
    cell: f64,
}

impl<'a> MovingLeastSquares<'a> {
    fn new(mesh: &'a SurfaceMesh, w: &'a [f64]) -> Self {
        let bn = 128;
        let cell = 2.0 * GRID_EXTENT / bn as f64;
        let mut buckets = vec![Vec::new(); bn * bn];
        for (idx, (p, _)) in mesh.chart_samples.iter().enumerate() {
            let bi = (((p.re + GRID_EXTENT) / cell) as usize).min(bn - 1);
            let bj = (((p.im + GRID_EXTENT) / cell) as usize).min(bn - 1);
            buckets[bj * bn + bi].push(idx as u32);
        }
        MovingLeastSquares { samples: &mesh.chart_samples, w, buckets, bn, cell }
    }

    fn gather(&self, z: C, out: &mut Vec<(f64, f64, f64)>) {
        out.clear();
        let bi = (((z.re + GRID_EXTENT) / self.cell) as i64).clamp(0, self.bn as i64 - 1);
        let bj = (((z.im + GRID_EXTENT) / self.cell) as i64).clamp(0, self.bn as i64 - 1);
        let mut ring = 1i64;
        while out.len() < 16 && ring <= 8 {
            out.clear();
            for j in (bj - ring).max(0)..=(bj + ring).min(self.bn as i64 - 1) {
                for i in (bi - ring).max(0)..=(bi + ring).min(self.bn as i64 - 1) {
                    for &idx in &self.buckets[j as usize * self.bn + i as usize] {
                        let (p, q) = self.samples[idx as usize];
                        out.push((p.re - z.re, p.im - z.im, self.w[q]));
                    }
                }
            }
            ring += 1;
        }
    }

    fn eval(&self, z: C) -> f64 {
        let mut pts = Vec::new();
        self.gather(z, &mut pts);
        if pts.is_empty() {
            return 0.0;
        }
        // Radius from the 15th-nearest sample; Wendland C² weights.
        let mut d2: Vec<f64> = pts.iter().map(|(dx, dy, _)| dx * dx + dy * dy).collect();
        let kth = 15.min(d2.len() - 1);
        let mut sorted = d2.clone();
        sorted.sort_by(f64::total_cmp);
        let radius = (sorted[kth].sqrt() * 1.3).max(1e-9);
        // Weighted normal equations for a quadric in scaled offsets.
        let mut ata = [[0.0f64; 6]; 6];
        let mut atb = [0.0f64; 6];
        for (k, &(dx, dy, val)) in pts.iter().enumerate() {
            let d = d2[k].sqrt() / radius;
            if d >= 1.0 {
                continue;
            }
            let wgt = {
                let q = 1.0 - d;
                q * q * q * q * (4.0 * d + 1.0)
            };
            let (sx, sy) = (dx / radius, dy / radius);
            let basis = [1.0, sx, sy, sx * sx, sx * sy, sy * sy];
            for r in 0..6 {
                for c in r..6 {
                    ata[r][c] += wgt * basis[r] * basis[c];
                }
                atb[r] += wgt * basis[r] * val;
            }
        }
        for r in 0..6 {
            for c in 0..r {
                ata[r][c] = ata[c][r];
            }
        }
        d2.clear();
        match solve6(&mut ata, &mut atb) {
            Some(coeffs) => coeffs[0],
            // Degenerate neighborhood: fall back to the nearest sample.
            None => {
                let mut best = (f64::INFINITY, 0.0);
                for &(dx, dy, val) in &pts {
                    let d = dx * dx + dy * dy;
                    if d < best.0 {
                        best = (d, val);
                    }
                }
                best.1
            }
        }
    }
}

fn solve6(a: &mut [[f64; 6]; 6], b: &mut [f64; 6]) -> Option<[f64; 6]> {
    for col in 0..6 {
        let mut piv = col;
        for r in col + 1..6 {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..6 {
            let f = a[r][col] / a[col][col];
            for c in col..6 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for r in (0..6).rev() {
        let mut acc = b[r];
        for c in r + 1..6 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

/// The assembled deformation path with its diagnostics.
pub struct DeformationPath {
    pub mesh: SurfaceMesh,
    pub h: Vec<f64>,
    pub recenter_shift: f64,
    pub w: Vec<f64>,
    pub mu: f64,
    /// `2πχ/vol` of the base metric on this mesh.
    pub gb_mean: f64,
    pub poisson_residual: f64,
    pub cg_iterations: usize,
    pub rho_grid: Vec<f64>,
    pub field: WField,
}

/// Default grid: 11 uniform samples of `[0, 1]`.
pub fn default_rho_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Build the whole pipeline: mesh, `h`, Poisson solve, smooth field.
pub fn build_path(
    surface: &BubbledSurface,
    params: &MeshParams,
    rho_grid: Vec<f64>,
) -> Result<DeformationPath, DeformError> {
    assert!(!rho_grid.is_empty());
    assert!(rho_grid.windows(2).all(|w| w[1] > w[0]));
    assert!(rho_grid[0] >= 0.0 && *rho_grid.last().unwrap() <= 1.0);
    let mesh = build_mesh(surface, params)?;
    let (h, recenter_shift) = compute_h(surface, &mesh)?;
    let sol = solve_poisson(&mesh, &h)?;
    let field = WField::build(surface, &mesh, &sol.w);
    Ok(DeformationPath {
        gb_mean: gb_mean(&mesh),
        mesh,
        h,
        recenter_shift,
        mu: sol.mu,
        w: sol.w,
        poisson_residual: sol.residual,
        cg_iterations: sol.iterations,
        rho_grid,
        field,
    })
}

impl DeformationPath {
    /// Curvature of `g_ρ` at every vertex, two ways: the algebraic route
    /// `e^{-2ρw}(K + ρh)` and the discrete-geometric route
    /// `e^{-2ρw}(K - ρ Δ_discrete w)` with `Δ_discrete w = -(L w)/M`. Their
    /// disagreement is bounded by the pointwise Poisson residual.
    pub fn curvature_of_deformed(
        &self,
        surface: &BubbledSurface,
        rho: f64,
    ) -> Result<Vec<f64>, DeformError> {
        let n = self.mesh.n_vertices();
        let mut lw = vec![0.0; n];
        self.mesh.stiffness_apply(&self.w, &mut lw);
        let mut algebraic = Vec::with_capacity(n);
        let mut worst = 0.0f64;
        let mut worst_allowed = 0.0f64;
        for i in 0..n {
            let k = surface.curvature_at(self.mesh.positions[i]);
            let damp = (-2.0 * rho * self.w[i]).exp();
            let route_a = damp * (k + rho * self.h[i]);
            let lap = -lw[i] / self.mesh.mass[i];
            let route_b = damp * (k - rho * lap);
            algebraic.push(route_a);
            worst = worst.max((route_a - route_b).abs());
            worst_allowed = worst_allowed.max((lw[i] - self.mesh.mass[i] * self.h[i]).abs() / self.mesh.mass[i]);
        }
        let tol = 10.0 * worst_allowed + 1e-12;
        if worst > tol {
            return Err(DeformError::FormulaMismatch { disagreement: worst, tol });
        }
        Ok(algebraic)
    }
}

/// Per-ρ row of the path property report.
#[derive(Debug, Clone)]
pub struct RhoDiagnostics {
    pub rho: f64,
    pub k_min: f64,
    pub k_max: f64,
    /// Max curvature over vertices outside every bubble support.
    pub k_max_outside: f64,
    /// Threshold `-ζ = -e^{-2μ}ε` for the outside region.
    pub zeta_threshold: f64,
    pub gauss_bonnet_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct PathReport {
    pub rows: Vec<RhoDiagnostics>,
    pub mu: f64,
    pub pass: bool,
}

/// Check the path properties on the ρ grid:
///
/// * P1 — outside every bubble support, `K_ρ < -e^{-2μ}ε`;
/// * P2 — `K_ρ < 0` wherever `K < 0`;
/// * P3 — where `K ≥ 0`, `ρ ↦ K_ρ` strictly decreases while it is still
///   nonnegative;
/// * P4 — `K_1 < 0` everywhere (when the grid reaches 1);
/// * P5 — `∫ K_ρ dA_ρ` stays at `2πχ = -4π`.
pub fn verify_path_properties(
    surface: &BubbledSurface,
    path: &DeformationPath,
) -> Result<PathReport, DeformError> {
    let mesh = &path.mesh;
    let n = mesh.n_vertices();
    let zeta = (-2.0 * path.mu).exp() * surface.epsilon;
    let base_k: Vec<f64> = mesh.positions.iter().map(|&p| surface.curvature_at(p)).collect();
    let outside: Vec<bool> = mesh
        .positions
        .iter()
        .map(|&p| surface.bumps.iter().all(|b| dist(p, b.center()) >= b.delta))
        .collect();
    let mut rows = Vec::with_capacity(path.rho_grid.len());
    let mut prev: Option<(f64, Vec<f64>)> = None;
    for &rho in &path.rho_grid {
        let k_rho = path.curvature_of_deformed(surface, rho)?;
        if rho == 0.0 {
            for i in 0..n {
                if k_rho[i] != base_k[i] {
                    return Err(DeformError::PropertyFailed {
                        tag: "P0-identity",
                        rho,
                        vertex: i,
                        value: k_rho[i] - base_k[i],
                    });
                }
            }
        }
        let mut k_min = f64::INFINITY;
        let mut k_max = f64::NEG_INFINITY;
        let mut k_max_outside = f64::NEG_INFINITY;
        for i in 0..n {
            k_min = k_min.min(k_rho[i]);
            k_max = k_max.max(k_rho[i]);
            if outside[i] {
                k_max_outside = k_max_outside.max(k_rho[i]);
                // P1, with 1e-6 slack quantifying strictness.
                if k_rho[i] >= -zeta + 1e-6 {
                    return Err(DeformError::PropertyFailed {
                        tag: "P1",
                        rho,
                        vertex: i,
                        value: k_rho[i],
                    });
                }
            }
            // P2: both terms of e^{-2ρw}((1-ρ)K + ρ(h+K)) are nonpositive
            // where K < 0, so the sign check is exact.
            if base_k[i] < 0.0 && k_rho[i] >= 0.0 {
                return Err(DeformError::PropertyFailed { tag: "P2", rho, vertex: i, value: k_rho[i] });
            }
        }
        // P3 on consecutive grid points.
        if let Some((rho_prev, k_prev)) = &prev {
            for i in 0..n {
                if base_k[i] >= 0.0 && k_prev[i] >= 0.0 && k_rho[i] >= k_prev[i] {
                    return Err(DeformError::PropertyFailed {
                        tag: "P3",
                        rho,
                        vertex: i,
                        value: k_rho[i] - k_prev[i],
                    });
                }
            }
            let _ = rho_prev;
        }
        if rho == 1.0 && k_max >= 0.0 {
            return Err(DeformError::PropertyFailed {
                tag: "P4",
                rho,
                vertex: 0,
                value: k_max,
            });
        }
        // P5: ∫ K_ρ dA_ρ = Σ (K + ρh) m, since K_ρ e^{2ρw} = K + ρh.
        let total: f64 = (0..n).map(|i| (base_k[i] + rho * path.h[i]) * mesh.mass[i]).sum();
        let target = -4.0 * std::f64::consts::PI;
        let gb_err = (total - target).abs() / target.abs();
        if gb_err > 1e-3 {
            return Err(DeformError::PropertyFailed { tag: "P5", rho, vertex: 0, value: gb_err });
        }
        rows.push(RhoDiagnostics {
            rho,
            k_min,
            k_max,
            k_max_outside,
            zeta_threshold: -zeta,
            gauss_bonnet_rel_err: gb_err,
        });
        prev = Some((rho, k_rho));
    }
    Ok(PathReport { rows, mu: path.mu, pass: true })
}

/// Report of [`verify_length_monotonicity`].
#[derive(Debug, Clone)]
pub struct LengthReport {
    pub curves: usize,
    /// Worst (most negative) length increment between consecutive ρ values.
    pub min_increment: f64,
    /// Largest `d_ρ(x, p_i)` over boundary samples, per bubble, at ρ = 1,
    /// with the `δ e^{μ}` bound it must stay under.
    pub bubble_radii: Vec<(f64, f64)>,
}

/// Discrete curve lengths never decrease along the path (the integrand
/// scales by `e^{ρw} ≥ 1` per segment), and bubbles dilate by at most
/// `e^{ρμ}`.
pub fn verify_length_monotonicity(
    surface: &BubbledSurface,
    path: &DeformationPath,
    n_curves: usize,
    seed: u64,
) -> Result<LengthReport, DeformError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mls = MovingLeastSquares::new(&path.mesh, &path.w);
    let length_rho = |pts: &[C], rho: f64| -> f64 {
        let mut total = 0.0;
        for pair in pts.windows(2) {
            let mid = (pair[0] + pair[1]) * 0.5;
            let ell = dist(pair[0], pair[1]) * (0.5 * (surface.u(pair[0]) + surface.u(pair[1]))).exp();
            total += ell * (rho * mls.eval(mid)).exp();
        }
        total
    };
    let mut min_increment = f64::INFINITY;
    for curve in 0..n_curves {
        // Alternate geodesic segments and wavy chart curves.
        let pts: Vec<C> = if curve % 2 == 0 {
            let z0 = C::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..std::f64::consts::TAU));
            let dir = rng.gen_range(0.0..std::f64::consts::TAU);
            (0..=100).map(|i| geodesic_point(z0, dir, 1.2 * i as f64 / 100.0)).collect()
        } else {
            let z0 = C::from_polar(rng.gen_range(0.0..0.4), rng.gen_range(0.0..std::f64::consts::TAU));
            let amp = rng.gen_range(0.02..0.08);
            let dir = rng.gen_range(0.0..std::f64::consts::TAU);
            (0..=100)
                .map(|i| {
                    let t = i as f64 / 100.0;
                    z0 + C::from_polar(0.3 * t, dir)
                        + C::from_polar(amp * (7.0 * t).sin(), dir + std::f64::consts::FRAC_PI_2)
                })
                .collect()
        };
        let mut last = None;
        for &rho in &path.rho_grid {
            let len = length_rho(&pts, rho);
            if let Some((rho_prev, len_prev)) = last {
                let diff: f64 = len - len_prev;
                min_increment = min_increment.min(diff);
                if diff < -1e-12 {
                    return Err(DeformError::MonotonicityViolated {
                        curve,
                        rho_lo: rho_prev,
                        rho_hi: rho,
                        diff,
                    });
                }
            }
            last = Some((rho, len));
        }
    }
    // Bubble dilation: points at g-distance δ from each center stay within
    // g_ρ-distance δ e^{ρμ}; bound the distance by the g_ρ-length of the
    // radial curve.
    let mut bubble_radii = Vec::new();
    for b in &surface.bumps {
        let mut worst = 0.0f64;
        for dir in 0..16 {
            let phi = dir as f64 * std::f64::consts::TAU / 16.0;
            // Hyperbolic radius at which the g-distance from the center
            // reaches δ (e^u ≥ 1 makes it slightly smaller than δ).
            let g_dist = |r: f64| -> f64 {
                let steps = 64;
                let mut acc = 0.0;
                for i in 0..steps {
                    let rr = r * (i as f64 + 0.5) / steps as f64;
                    acc += surface.u(geodesic_point(b.center(), phi, rr)).exp();
                }
                acc * r / steps as f64
            };
            let (mut lo, mut hi) = (0.0, b.delta);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if g_dist(mid) < b.delta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r_delta = 0.5 * (lo + hi);
            let rho = *path.rho_grid.last().unwrap();
            let steps = 128;
            let mut len = 0.0;
            for i in 0..steps {
                let rr = r_delta * (i as f64 + 0.5) / steps as f64;
                let z = geodesic_point(b.center(), phi, rr);
                len += (surface.u(z) + rho * mls.eval(z)).exp();
            }
            len *= r_delta / steps as f64;
            worst = worst.max(len);
        }
        let bound = b.delta * ((*path.rho_grid.last().unwrap()) * path.mu).exp();
        if worst > bound + 1e-9 {
            return Err(DeformError::MonotonicityViolated {
                curve: usize::MAX,
                rho_lo: 0.0,
                rho_hi: *path.rho_grid.last().unwrap(),
                diff: worst - bound,
            });
        }
        bubble_radii.push((worst, bound));
    }
    Ok(LengthReport { curves: n_curves, min_increment, bubble_radii })
}

/// Shoot a `g_ρ` geodesic from a bubble center and report the chart point
/// reached after arc length `δ e^{ρμ}` (a dilation witness for the report).
pub fn shoot_bubble_radius(
    surface: &BubbledSurface,
    path: &DeformationPath,
    bump: usize,
    rho: f64,
    phi: f64,
) -> Result<(C, f64), DeformError> {
    let b = &surface.bumps[bump];
    let arc = b.delta * (rho * path.mu).exp();
    let init = GeodesicState::new(b.center(), phi);
    let traj = geodesic_flow(surface, init, arc, Some((&path.field, rho)), &FlowOptions::default())?;
    let end = traj.end.z;
    Ok((end, dist(b.center(), end)))
}
