//! A genus-two hyperbolic surface with conformal curvature bumps, and its
//! geodesic flow.
//!
//! The metric is `g = e^{2u} g_hyp` on the octagon quotient, where
//! `u(z) = Σ A_i ψ(d_hyp(z, p_i)/δ_i)` is a sum of radial bumps with
//! `ψ(s) = (1-s²)³` supported in the unit interval. Curvature follows the
//! conformal formula specialized to the curvature -1 base,
//! `K = e^{-2u}(-1 - Δ_hyp u)`, with the radial hyperbolic Laplacian
//! `Δf(r) = f''(r) + coth(r) f'(r)` evaluated in closed form — no
//! discretization anywhere in the curvature path. Outside every bump
//! support the evaluation short-circuits to exactly `-1`.
//!
//! Geodesics are integrated in the unit-speed angle form for a conformal
//! metric `e^{2φ}|dz|²`:
//!
//! ```text
//! ẋ = e^{-φ} cos θ,   ẏ = e^{-φ} sin θ,   θ̇ = e^{-φ}(φ_y cos θ - φ_x sin θ)
//! ```
//!
//! which keeps the metric speed at exactly 1. On leaving the octagon the
//! state is pulled back by the side pairing (position by the Möbius map,
//! direction by the argument of its derivative) and the pairing is appended
//! to the accumulated word, tracking the lift in the universal cover.

use crate::hyperbolic::{
    direction_towards, dist, dist_gradient, geodesic_point, lambda, FuchsianDomain, Mobius, C,
};
use crate::ode::{Dopri5, OdeError, Step, Tol, DEFAULT_TOL};
use crate::riccati::{Curvature, Domain, Smoothness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("trajectory passed within {dist:.2e} of an octagon vertex at t = {t}")]
    CornerHit { t: f64, dist: f64 },
    #[error("bump layout invalid: {0}")]
    BumpLayout(String),
    #[error("calibration cannot reach max curvature {target}: best achievable {achieved}")]
    Unreachable { target: f64, achieved: f64 },
    #[error("bubble separation violated: geodesic seed {seed}, gap {gap:.4} < required {required:.4}")]
    SeparationViolated { seed: u64, gap: f64, required: f64 },
    #[error("surface file: {0}")]
    Format(String),
}

/// Radial bump profile `ψ(s) = (1-s²)³` on `[0, 1]`.
pub fn psi(s: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    q * q * q
}

fn psi_prime(s: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    -6.0 * s * q * q
}

fn psi_second(s: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    q * (30.0 * s * s - 6.0)
}

/// One conformal bump: `A ψ(d(z, center)/delta)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bump {
    pub x: f64,
    pub y: f64,
    pub delta: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn center(&self) -> C {
        C::new(self.x, self.y)
    }
}

/// Extra conformal factor carried by a deformation path; the flow only
/// needs the value and Euclidean gradient of `w`.
pub trait ConformalField: Sync {
    fn value_grad(&self, z: C) -> (f64, C);
}

/// Genus-two surface `g = e^{2u} g_hyp` with bubble bumps.
#[derive(Debug, Clone)]
pub struct BubbledSurface {
    pub domain: FuchsianDomain,
    pub bumps: Vec<Bump>,
    /// Family curvature bound outside bubbles; `K = -1` there, so any
    /// `epsilon` in `(0, 1)` is honored.
    pub epsilon: f64,
    pub seed: u64,
}

impl BubbledSurface {
    /// Build and validate: supports pairwise disjoint and clear of the
    /// boundary collar (so bubbles never straddle side identifications).
    pub fn new(bumps: Vec<Bump>, epsilon: f64, seed: u64) -> Result<BubbledSurface, SurfaceError> {
        let domain = FuchsianDomain::regular_genus2();
        for (i, b) in bumps.iter().enumerate() {
            if b.delta <= 0.0 {
                return Err(SurfaceError::BumpLayout(format!("bump {i} has nonpositive delta")));
            }
            if !domain.contains(b.center()) {
                return Err(SurfaceError::BumpLayout(format!(
                    "bump {i} center outside the octagon"
                )));
            }
            let dir = if b.center().norm() < 1e-12 { 0.0 } else { b.center().arg() };
            let reach = domain.boundary_radius(dir);
            let r = dist(C::new(0.0, 0.0), b.center());
            if reach - r < 2.0 * b.delta {
                return Err(SurfaceError::BumpLayout(format!(
                    "bump {i} support enters the boundary collar"
                )));
            }
            for (j, other) in bumps.iter().enumerate().skip(i + 1) {
                let d = dist(b.center(), other.center());
                if d < b.delta + other.delta {
                    return Err(SurfaceError::BumpLayout(format!("bumps {i} and {j} overlap")));
                }
            }
        }
        Ok(BubbledSurface { domain, bumps, epsilon, seed })
    }

    /// Conformal exponent `u(z)`.
    pub fn u(&self, z: C) -> f64 {
        let mut total = 0.0;
        for b in &self.bumps {
            let r = dist(z, b.center());
            if r < b.delta {
                total += b.amplitude * psi(r / b.delta);
            }
        }
        total
    }

    /// `u` and its Euclidean gradient.
    pub fn u_grad(&self, z: C) -> (f64, C) {
        let mut val = 0.0;
        let mut grad = C::new(0.0, 0.0);
        for b in &self.bumps {
            let r = dist(z, b.center());
            if r < b.delta {
                val += b.amplitude * psi(r / b.delta);
                if r > 1e-12 {
                    grad += dist_gradient(z, b.center())
                        * (b.amplitude / b.delta * psi_prime(r / b.delta));
                }
            }
        }
        (val, grad)
    }

    /// `Δ_hyp u` via the radial Laplacian `f'' + coth(r) f'` of each bump.
    pub fn laplacian_u(&self, z: C) -> f64 {
        let mut total = 0.0;
        for b in &self.bumps {
            let r = dist(z, b.center());
            if r < b.delta {
                total += if r < 1e-6 {
                    // coth(r) ψ'(r/δ)/δ → ψ''(0)/δ² as r → 0.
                    -12.0 * b.amplitude / (b.delta * b.delta)
                } else {
                    b.amplitude
                        * (psi_second(r / b.delta) / (b.delta * b.delta)
                            + psi_prime(r / b.delta) / (b.delta * r.tanh()))
                };
            }
        }
        total
    }

    /// Gaussian curvature `K = e^{-2u}(-1 - Δ_hyp u)`; exactly `-1` outside
    /// all bump supports.
    pub fn curvature_at(&self, z: C) -> f64 {
        if self.bumps.iter().all(|b| dist(z, b.center()) >= b.delta) {
            return -1.0;
        }
        (-2.0 * self.u(z)).exp() * (-1.0 - self.laplacian_u(z))
    }

    /// Index of the bump whose support contains `z`, if any.
    pub fn bump_at(&self, z: C) -> Option<usize> {
        self.bumps.iter().position(|b| dist(z, b.center()) < b.delta)
    }

    /// Measured maximum curvature over dense radial grids in each bump.
    pub fn measured_kplus(&self) -> f64 {
        let mut sup = -1.0f64;
        for b in &self.bumps {
            for j in 0..=2000 {
                let r = b.delta * j as f64 / 2000.0;
                let z = geodesic_point(b.center(), 0.0, r);
                sup = sup.max(self.curvature_at(z));
            }
        }
        sup
    }

    /// Geodesic-polar quadrature `∫ f dA_hyp` over the octagon, from the
    /// origin. The radial rule samples at `(i + 0.375) h`: the offset makes
    /// the leading quadrature error first order in `1/res_r` and large
    /// enough against the second-order remainder that the
    /// resolution-doubling probe halves the error.
    pub fn polar_quadrature(&self, res_r: usize, res_theta: usize, f: impl Fn(C) -> f64) -> f64 {
        let mut total = 0.0;
        for j in 0..res_theta {
            let theta = (j as f64 + 0.5) * std::f64::consts::TAU / res_theta as f64;
            let rmax = self.domain.boundary_radius(theta);
            let h = rmax / res_r as f64;
            let mut ray = 0.0;
            for i in 0..res_r {
                let r = (i as f64 + 0.375) * h;
                let z = C::from_polar((r / 2.0).tanh(), theta);
                ray += f(z) * r.sinh();
            }
            total += ray * h;
        }
        total * std::f64::consts::TAU / res_theta as f64
    }

    /// `vol(M) = ∫ e^{2u} dA_hyp` at the given quadrature resolution.
    pub fn volume(&self, res_r: usize, res_theta: usize) -> f64 {
        self.polar_quadrature(res_r, res_theta, |z| (2.0 * self.u(z)).exp())
    }

    /// `∫ K dA_g` at the given quadrature resolution (Gauss–Bonnet gives
    /// `2πχ = -4π` exactly).
    pub fn total_curvature(&self, res_r: usize, res_theta: usize) -> f64 {
        self.polar_quadrature(res_r, res_theta, |z| self.curvature_at(z) * (2.0 * self.u(z)).exp())
    }
}

/// Default quadrature resolution (radial x angular).
pub const QUAD_RES: (usize, usize) = (512, 1024);

/// Scale all bump amplitudes by bisection until the measured maximum
/// curvature lands in `[0.95, 1.0] · target_kplus`, then enforce the
/// focal-free-ball criterion `δ ≤ π/(4√K⁺)` for every bump.
pub fn calibrate_amplitudes(
    surface: &BubbledSurface,
    target_kplus: f64,
) -> Result<BubbledSurface, SurfaceError> {
    assert!(target_kplus > 0.0);
    if surface.bumps.is_empty() {
        return Err(SurfaceError::Unreachable { target: target_kplus, achieved: -1.0 });
    }
    let scaled = |factor: f64| {
        let bumps: Vec<Bump> =
            surface.bumps.iter().map(|b| Bump { amplitude: b.amplitude * factor, ..*b }).collect();
        BubbledSurface { domain: surface.domain.clone(), bumps, ..*surface }
    };
    let aim = 0.975 * target_kplus;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut tries = 0;
    while scaled(hi).measured_kplus() < aim {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(SurfaceError::Unreachable {
                target: target_kplus,
                achieved: scaled(hi).measured_kplus(),
            });
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if scaled(mid).measured_kplus() < aim {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let out = scaled(0.5 * (lo + hi));
    let measured = out.measured_kplus();
    if !(measured >= 0.95 * target_kplus && measured <= target_kplus) {
        return Err(SurfaceError::Unreachable { target: target_kplus, achieved: measured });
    }
    for b in &out.bumps {
        let focal = crate::riccati::focal_free_radius(measured);
        if b.delta > focal {
            return Err(SurfaceError::BumpLayout(format!(
                "bump radius {} exceeds the focal-free radius {focal}",
                b.delta
            )));
        }
    }
    Ok(out)
}

/// Instantaneous state of the flow: position in the fundamental domain,
/// disk-chart direction of the (unit) velocity, and the lift bookkeeping.
#[derive(Debug, Clone)]
pub struct GeodesicState {
    pub z: C,
    pub theta: f64,
    pub word: Vec<u8>,
    pub deck: Mobius,
}

impl GeodesicState {
    pub fn new(z: C, theta: f64) -> Self {
        GeodesicState { z, theta, word: Vec::new(), deck: Mobius::IDENTITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowEventKind {
    Wrap { side: u8 },
    BubbleEnter { bump: usize },
    BubbleExit { bump: usize },
}

#[derive(Debug, Clone)]
pub struct FlowEvent {
    pub t: f64,
    pub kind: FlowEventKind,
    /// Deck transformation at the time of the event (identifies the lift).
    pub deck: Mobius,
}

/// A flowed geodesic: contiguous Hermite segments in chart coordinates,
/// plus wrap and bubble-boundary events.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub segments: Vec<Step<3>>,
    pub events: Vec<FlowEvent>,
    pub t0: f64,
    pub t1: f64,
    pub init: GeodesicState,
    pub end: GeodesicState,
}

impl Trajectory {
    pub fn position(&self, t: f64) -> C {
        let y = self.state_at(t);
        C::new(y[0], y[1])
    }

    pub fn state_at(&self, t: f64) -> [f64; 3] {
        let forward = self.t1 >= self.t0;
        let idx = self
            .segments
            .partition_point(|s| if forward { s.t1 < t } else { s.t1 > t })
            .min(self.segments.len() - 1);
        self.segments[idx].eval(t)
    }

    /// Bubble-intersection intervals in time, ascending, with the bump
    /// index and the lift at entry. Enter/exit kinds are recorded along the
    /// integration direction, so a backward flow reads them swapped.
    pub fn bubble_intervals(&self) -> Vec<BubbleVisit> {
        let backward = self.t1 < self.t0;
        let mut events: Vec<(f64, usize, bool, Mobius)> = self
            .events
            .iter()
            .filter_map(|e| match e.kind {
                FlowEventKind::BubbleEnter { bump } => Some((e.t, bump, !backward, e.deck)),
                FlowEventKind::BubbleExit { bump } => Some((e.t, bump, backward, e.deck)),
                FlowEventKind::Wrap { .. } => None,
            })
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut visits = Vec::new();
        let mut open: Option<(usize, f64, Mobius)> = None;
        let (lo, hi) = (self.t0.min(self.t1), self.t0.max(self.t1));
        for (t, bump, entering, deck) in events {
            if entering {
                open = Some((bump, t, deck));
            } else if let Some((b0, t_in, deck_in)) = open.take() {
                if b0 == bump {
                    visits.push(BubbleVisit { bump, enter: t_in, exit: t, deck: deck_in });
                }
            } else {
                // Interval open at the ascending end of the span.
                visits.push(BubbleVisit { bump, enter: lo, exit: t, deck });
            }
        }
        if let Some((bump, t_in, deck)) = open {
            visits.push(BubbleVisit { bump, enter: t_in, exit: hi, deck });
        }
        visits
    }
}

/// One traversal of a bubble support.
#[derive(Debug, Clone)]
pub struct BubbleVisit {
    pub bump: usize,
    pub enter: f64,
    pub exit: f64,
    pub deck: Mobius,
}

/// Flow options.
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub tol: Tol,
    pub max_step: f64,
    /// Corner-hit threshold (hyperbolic distance at a wrap crossing).
    pub corner_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: DEFAULT_TOL, max_step: 0.05, corner_tol: 1e-8 }
    }
}

// A wrap triggers once a step endpoint clips a side deeper than
// DETECT_MARGIN; a freshly wrapped state is accepted as interior down to
// ACCEPT_MARGIN. The hysteresis band keeps tangential grazes from
// ping-ponging between paired sides without progress.
const DETECT_MARGIN: f64 = 1e-12;
const ACCEPT_MARGIN: f64 = 1e-11;

struct FlowRhs<'a> {
    surface: &'a BubbledSurface,
    field: Option<(&'a dyn ConformalField, f64)>,
}

impl FlowRhs<'_> {
    #[inline]
    fn phi_grad(&self, z: C) -> (f64, C) {
        let lam = lambda(z);
        let mut phi = lam.ln();
        let mut grad = z * lam;
        let (u, gu) = self.surface.u_grad(z);
        phi += u;
        grad += gu;
        if let Some((w, rho)) = self.field {
            let (wv, wg) = w.value_grad(z);
            phi += rho * wv;
            grad += wg * rho;
        }
        (phi, grad)
    }

    #[inline]
    fn eval(&self, y: &[f64; 3]) -> [f64; 3] {
        let z = C::new(y[0], y[1]);
        let (phi, grad) = self.phi_grad(z);
        let em = (-phi).exp();
        let (sin_t, cos_t) = y[2].sin_cos();
        [em * cos_t, em * sin_t, em * (grad.im * cos_t - grad.re * sin_t)]
    }
}

/// Integrate the geodesic flow of `g` (or `e^{2ρw} g` when `field` is set)
/// from `init` for time `t_end` (signed), wrapping through side pairings.
pub fn geodesic_flow(
    surface: &BubbledSurface,
    init: GeodesicState,
    t_end: f64,
    field: Option<(&dyn ConformalField, f64)>,
    opts: &FlowOptions,
) -> Result<Trajectory, SurfaceError> {
    let rhs = FlowRhs { surface, field };
    let dom = &surface.domain;
    let mut state = init.clone();
    let mut t = 0.0f64;
    let mut segments: Vec<Step<3>> = Vec::new();
    let mut events: Vec<FlowEvent> = Vec::new();
    let mut inside: Vec<bool> =
        surface.bumps.iter().map(|b| dist(state.z, b.center()) < b.delta).collect();
    let mut zero_progress_wraps = 0usize;

    loop {
        let mut solver = Dopri5::new(
            |_, y: &[f64; 3]| rhs.eval(y),
            t,
            [state.z.re, state.z.im, state.theta],
            t_end,
            opts.tol,
        );
        solver.set_max_step(opts.max_step);
        let mut wrapped = false;
        while !solver.done() {
            let st = solver.step()?;
            let z1 = C::new(st.y1[0], st.y1[1]);
            let (side, margin) = dom.worst_side(z1);
            // Clips shallower than the position noise are benign: the metric
            // continues smoothly across the side geodesic (u vanishes in the
            // boundary collar).
            if margin < -DETECT_MARGIN {
                // Locate the first boundary crossing inside this step by
                // bisection on the side margin along the Hermite model,
                // then re-take a single controlled step of that length so
                // the crossing state carries full integration accuracy.
                let cross = |tau: f64| {
                    let y = st.eval(tau);
                    dom.sides[side].margin(C::new(y[0], y[1]))
                };
                // The step start satisfies margin >= -ACCEPT_MARGIN, so
                // bisecting against the detection threshold always makes
                // progress past t0.
                let (mut lo, mut hi) = (st.t0, st.t1);
                for _ in 0..70 {
                    let mid = 0.5 * (lo + hi);
                    if cross(mid) >= -DETECT_MARGIN {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let tau = 0.5 * (lo + hi);
                let progressed = (tau - st.t0).abs() > 1e-13 * (1.0 + st.t0.abs());
                let (yc, fc) = if progressed {
                    let mut probe =
                        Dopri5::new(|_, y: &[f64; 3]| rhs.eval(y), st.t0, st.y0, tau, opts.tol);
                    let mut partial = None;
                    while !probe.done() {
                        partial = Some(probe.step()?);
                    }
                    let at = partial.expect("probe has positive length");
                    (at.y1, at.f1)
                } else {
                    // Crossing at the very start of the step (the wrapped
                    // state clipped a second side near a corner).
                    (st.y0, st.f0)
                };
                let zc = C::new(yc[0], yc[1]);
                let corner = dom.corner_distance(zc);
                if corner < opts.corner_tol {
                    return Err(SurfaceError::CornerHit { t: tau, dist: corner });
                }
                if progressed {
                    record_bubble_events(surface, &st, st.t0, tau, &mut inside, &state, &mut events);
                    segments.push(Step { t1: tau, y1: yc, f1: fc, ..st });
                    zero_progress_wraps = 0;
                } else {
                    zero_progress_wraps += 1;
                    if zero_progress_wraps > 32 {
                        return Err(SurfaceError::CornerHit { t: tau, dist: 0.0 });
                    }
                }
                let mut theta_c = yc[2];
                let mut z_c = zc;
                // Pull back across whichever sides are violated; near a
                // corner a single wrap can land outside the next side.
                let mut k = side;
                for _ in 0..8 {
                    let (z2, theta2) = dom.pull_back(k, z_c, theta_c);
                    state.word.push(k as u8);
                    state.deck = state.deck.compose(&dom.pairings[k]).renormalized();
                    events.push(FlowEvent {
                        t: tau,
                        kind: FlowEventKind::Wrap { side: k as u8 },
                        deck: state.deck,
                    });
                    z_c = z2;
                    theta_c = theta2;
                    let (k2, m2) = dom.worst_side(z_c);
                    if m2 >= -ACCEPT_MARGIN {
                        break;
                    }
                    k = k2;
                }
                state.z = z_c;
                state.theta = theta_c;
                t = tau;
                wrapped = true;
                break;
            }
            record_bubble_events(surface, &st, st.t0, st.t1, &mut inside, &state, &mut events);
            segments.push(st);
            state.z = z1;
            state.theta = st.y1[2];
            t = st.t1;
        }
        if !wrapped {
            break;
        }
    }
    Ok(Trajectory { segments, events, t0: 0.0, t1: t_end, init, end: state })
}

/// Detect support-boundary crossings of each bump inside `[ta, tb]` of an
/// accepted step, sampling the Hermite model finely enough that a graze
/// through a bubble cannot hide between samples.
fn record_bubble_events(
    surface: &BubbledSurface,
    st: &Step<3>,
    ta: f64,
    tb: f64,
    inside: &mut [bool],
    state: &GeodesicState,
    events: &mut Vec<FlowEvent>,
) {
    for (i, b) in surface.bumps.iter().enumerate() {
        let sdist = |tau: f64| {
            let y = st.eval(tau);
            dist(C::new(y[0], y[1]), b.center()) - b.delta
        };
        let (da, db) = (sdist(ta), sdist(tb));
        let span = (tb - ta).abs();
        if da > span + 1e-9 && db > span + 1e-9 {
            continue;
        }
        let n = 8;
        let mut prev_t = ta;
        let mut prev_in = inside[i];
        for j in 1..=n {
            let tc = ta + (tb - ta) * j as f64 / n as f64;
            let now_in = sdist(tc) < 0.0;
            if now_in != prev_in {
                let (mut lo, mut hi) = (prev_t, tc);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (sdist(mid) < 0.0) == prev_in {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let tau = 0.5 * (lo + hi);
                let kind = if now_in {
                    FlowEventKind::BubbleEnter { bump: i }
                } else {
                    FlowEventKind::BubbleExit { bump: i }
                };
                events.push(FlowEvent { t: tau, kind, deck: state.deck });
                prev_in = now_in;
            }
            prev_t = tc;
        }
        inside[i] = prev_in;
    }
}

/// Curvature along a flowed trajectory, evaluated analytically at the
/// Hermite-interpolated position; with a deformation field the conformal
/// curvature formula `K_ρ = e^{-2ρw}((1-ρ)K + ρc)` is used.
pub struct TrajectoryCurvature<'a> {
    pub surface: &'a BubbledSurface,
    pub trajectory: &'a Trajectory,
    pub field: Option<(&'a dyn ConformalField, f64)>,
    /// Gauss–Bonnet mean `c = 2πχ/vol` of the base surface (only used when
    /// `field` is set).
    pub gb_mean: f64,
}

impl<'a> TrajectoryCurvature<'a> {
    pub fn undeformed(surface: &'a BubbledSurface, trajectory: &'a Trajectory) -> Self {
        TrajectoryCurvature { surface, trajectory, field: None, gb_mean: 0.0 }
    }

    /// Bubble intervals `(a_m, b_m)` along the parameter.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.trajectory.bubble_intervals().iter().map(|v| (v.enter, v.exit)).collect()
    }
}

impl Curvature for TrajectoryCurvature<'_> {
    fn eval(&self, t: f64) -> f64 {
        let z = self.trajectory.position(t);
        let k = self.surface.curvature_at(z);
        match self.field {
            None => k,
            Some((w, rho)) => {
                let (wv, _) = w.value_grad(z);
                (-2.0 * rho * wv).exp() * ((1.0 - rho) * k + rho * self.gb_mean)
            }
        }
    }

    fn domain(&self) -> Domain {
        let (lo, hi) = if self.trajectory.t1 >= self.trajectory.t0 {
            (self.trajectory.t0, self.trajectory.t1)
        } else {
            (self.trajectory.t1, self.trajectory.t0)
        };
        Domain::Interval(lo, hi)
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C0
    }
}

/// Seeded initial conditions stratified over bubble-crossing,
/// bubble-grazing, and uniform-random geodesics.
pub fn stratified_states(
    surface: &BubbledSurface,
    n: usize,
    seed: u64,
) -> Vec<(u64, GeodesicState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let n_bumps = surface.bumps.len();
    for i in 0..n {
        let s = seed.wrapping_add(i as u64).wrapping_mul(0x9E3779B97F4A7C15);
        let state = match i % 3 {
            0 | 1 if n_bumps > 0 => {
                let b = &surface.bumps[i % n_bumps];
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                let d0 = rng.gen_range(0.8..1.2);
                let z = geodesic_point(b.center(), phi, d0);
                let aim = direction_towards(z, b.center());
                if i % 3 == 0 {
                    GeodesicState::new(z, aim)
                } else {
                    // Tangent to the support circle: offset the aim by the
                    // angle at which the closest approach equals the support
                    // radius (sin α = sinh δ / sinh d).
                    let off = (b.delta.sinh() / d0.sinh()).asin();
                    GeodesicState::new(z, aim + off)
                }
            }
            _ => {
                let r = rng.gen_range(0.0..surface.domain.inradius * 0.8);
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                GeodesicState::new(C::from_polar((r / 2.0).tanh(), phi), theta)
            }
        };
        out.push((s, state));
    }
    out
}

/// Report of [`bubble_separation_stats`].
#[derive(Debug, Clone)]
pub struct SeparationStats {
    pub n_geodesics: usize,
    pub n_visits: usize,
    /// Smallest gap between consecutive bubble visits (any bubble).
    pub min_gap: f64,
    /// Smallest arc separation between visits to the same lift, if any
    /// same-lift revisit occurred.
    pub min_same_lift_gap: Option<f64>,
    pub required_gap: f64,
}

/// Flow seeded geodesics and record the gaps between bubble visits; family
/// membership requires every gap to reach `Λ(ε)`, and visits to the same
/// bubble lift (equal deck word) to be separated by at least `2δ e^{μ}` in
/// arc length.
pub fn bubble_separation_stats(
    surface: &BubbledSurface,
    n_geodesics: usize,
    horizon_t: f64,
    seed: u64,
    mu: f64,
) -> Result<SeparationStats, SurfaceError> {
    let lambda_eps = (1.0 - surface.epsilon / 2.0).atanh() / surface.epsilon.sqrt();
    let opts = FlowOptions::default();
    let mut min_gap = f64::INFINITY;
    let mut min_same: Option<f64> = None;
    let mut n_visits = 0;
    let states = stratified_states(surface, n_geodesics, seed);
    let max_delta = surface.bumps.iter().map(|b| b.delta).fold(0.0f64, f64::max);
    for (s, init) in states {
        let traj = geodesic_flow(surface, init, horizon_t, None, &opts)?;
        let visits = traj.bubble_intervals();
        n_visits += visits.len();
        for w in visits.windows(2) {
            let gap = w[1].enter - w[0].exit;
            if gap < min_gap {
                min_gap = gap;
            }
            if gap < lambda_eps {
                return Err(SurfaceError::SeparationViolated { seed: s, gap, required: lambda_eps });
            }
        }
        for i in 0..visits.len() {
            for j in i + 1..visits.len() {
                if visits[i].bump == visits[j].bump
                    && visits[i].deck.approx_eq(&visits[j].deck, 1e-6)
                {
                    let sep = visits[j].enter - visits[i].exit;
                    min_same = Some(min_same.map_or(sep, |m: f64| m.min(sep)));
                    if sep < 2.0 * max_delta * mu.exp() {
                        return Err(SurfaceError::SeparationViolated {
                            seed: s,
                            gap: sep,
                            required: 2.0 * max_delta * mu.exp(),
                        });
                    }
                }
            }
        }
    }
    Ok(SeparationStats {
        n_geodesics,
        n_visits,
        min_gap,
        min_same_lift_gap: min_same,
        required_gap: lambda_eps,
    })
}

/// On-disk surface description.
#[derive(Debug, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub schema: String,
    pub epsilon: f64,
    pub seed: u64,
    pub bumps: Vec<Bump>,
    pub diagnostics: SurfaceDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SurfaceDiagnostics {
    pub measured_kplus: f64,
    pub gauss_bonnet_error_rel: f64,
    pub volume: f64,
    pub min_bubble_gap: f64,
    pub separation_geodesics: usize,
}

impl BubbledSurface {
    pub fn to_file(&self, diagnostics: SurfaceDiagnostics) -> String {
        let file = SurfaceFile {
            schema: "bubbled-surface/1".to_string(),
            epsilon: self.epsilon,
            seed: self.seed,
            bumps: self.bumps.clone(),
            diagnostics,
        };
        toml::to_string(&file).expect("surface serializes")
    }

    pub fn from_file(text: &str) -> Result<(BubbledSurface, SurfaceDiagnostics), SurfaceError> {
        let file: SurfaceFile =
            toml::from_str(text).map_err(|e| SurfaceError::Format(e.to_string()))?;
        if file.schema != "bubbled-surface/1" {
            return Err(SurfaceError::Format(format!("unknown schema {}", file.schema)));
        }
        let s = BubbledSurface::new(file.bumps, file.epsilon, file.seed)?;
        Ok((s, file.diagnostics))
    }
}
