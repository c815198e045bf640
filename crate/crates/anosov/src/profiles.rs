//! Synthetic curvature profiles with "generalized bubble" intervals, the
//! explicit admissibility bounds, and the profile-level hyperbolicity
//! certificate.
//!
//! A profile models the curvature seen along one unit-speed geodesic of a
//! surface in the family `𝓜(δ, k, ε, Λ)`: at most `-ε` outside a set of
//! bubble intervals `(a_m, b_m)` of length `≤ 2δ` separated by at least `Λ`,
//! and at most `K⁺` inside them. The interior of a bubble interval is a C²
//! plateau bump whose flat top sits exactly at `K⁺`; outside, a smooth
//! seeded jitter keeps the curvature in `[-3ε/2, -ε]` so the bounds are
//! exercised away from the constant-curvature special case.

use crate::ode::DEFAULT_TOL;
use crate::riccati::{
    integrate_jacobi, riccati_on_grid, stable_unstable_pair, Curvature, Domain, JacobiState,
    PairOptions, RiccatiError, Smoothness, Window,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("parameter out of range: {0}")]
    DomainError(&'static str),
    #[error("bad bubble layout: {0}")]
    LayoutError(String),
    #[error("exit bound violated after gap {m}: U = {u_exit:.6e} <= threshold {threshold:.6e}")]
    BoundViolated { m: usize, u_exit: f64, threshold: f64 },
    #[error("crossing floor violated at t = {t:.6}: U = {u:.6e}, floor = {floor:.6e}")]
    FloorViolated { t: f64, u: f64, floor: f64 },
    #[error("profile {index} (seed {seed}) failed certification: {reason}; fixture:\n{fixture}")]
    CertificateFailed { index: usize, seed: u64, reason: String, fixture: String },
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

/// `Λ(ε) = (1/√ε) artanh(1 - ε/2)`: the gap length after which a
/// nonnegative Riccati solution under curvature `≤ -ε` exceeds
/// `√ε (1 - ε/2)`.
pub fn lambda_of_epsilon(epsilon: f64) -> Result<f64, ProfileError> {
    if epsilon <= 0.0 || epsilon >= 1.0 || epsilon.is_nan() {
        return Err(ProfileError::DomainError("epsilon must lie in (0, 1)"));
    }
    Ok((1.0 - epsilon / 2.0).atanh() / epsilon.sqrt())
}

/// Upper curvature bound of the first theorem:
/// `(√ε(1-ε/2) - ε(2δ+1)(1-ε/2)²) / (2δ)`. May be negative.
pub fn kplus_bound_theorem1(epsilon: f64, delta: f64) -> f64 {
    let s = epsilon.sqrt();
    let q = 1.0 - epsilon / 2.0;
    (s * q - epsilon * (2.0 * delta + 1.0) * q * q) / (2.0 * delta)
}

/// Largest `δ` for which [`kplus_bound_theorem1`] is positive:
/// `(1/2)(1/(√ε(1-ε/2)) - 1)`.
pub fn delta_threshold_theorem1(epsilon: f64) -> f64 {
    0.5 * (1.0 / (epsilon.sqrt() * (1.0 - epsilon / 2.0)) - 1.0)
}

/// Upper curvature bound of the deformation theorem:
/// `(√ε / (4 e^{2μ} δ)) [tanh(e^{-μ} ln3/3) - √ε e^{-μ} tanh²(e^{-μ} ln3/3)(4 e^{μ} δ + 1)]`.
pub fn kplus_bound_theorem3(epsilon: f64, delta: f64, mu: f64) -> f64 {
    let s = epsilon.sqrt();
    let em = (-mu).exp();
    let th = (em * 3f64.ln() / 3.0).tanh();
    s / (4.0 * (2.0 * mu).exp() * delta) * (th - s * em * th * th * (4.0 * mu.exp() * delta + 1.0))
}

/// Largest `δ` for which [`kplus_bound_theorem3`] is positive:
/// `(1/(4 e^{μ}))(1/(√ε e^{-μ} tanh(e^{-μ} ln3/3)) - 1)`.
pub fn delta_threshold_theorem3(epsilon: f64, mu: f64) -> f64 {
    let em = (-mu).exp();
    let th = (em * 3f64.ln() / 3.0).tanh();
    (1.0 / (epsilon.sqrt() * em * th) - 1.0) / (4.0 * mu.exp())
}

/// Parameters of the family `𝓜(δ, k, ε, Λ)` plus the conformal exponent
/// bound `μ` (zero for undeformed runs).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FamilyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub lambda_gap: f64,
    pub kplus: f64,
    pub mu: f64,
}

impl FamilyParams {
    pub fn new(
        epsilon: f64,
        delta: f64,
        k: usize,
        lambda_gap: f64,
        kplus: f64,
    ) -> Result<Self, ProfileError> {
        let lam = lambda_of_epsilon(epsilon)?;
        if delta <= 0.0 {
            return Err(ProfileError::DomainError("delta must be positive"));
        }
        if lambda_gap < lam {
            return Err(ProfileError::DomainError("lambda_gap must be at least lambda_of_epsilon"));
        }
        Ok(FamilyParams { epsilon, delta, k, lambda_gap, kplus, mu: 0.0 })
    }

    pub fn theorem1_admissible(&self) -> bool {
        self.kplus < kplus_bound_theorem1(self.epsilon, self.delta)
    }

    /// Per-side Riccati floor of the first theorem: `ε(1-ε/2)²`.
    pub fn floor_theorem1(&self) -> f64 {
        let q = 1.0 - self.epsilon / 2.0;
        self.epsilon * q * q
    }

    /// Exit threshold after a full gap: `√ε(1-ε/2)`.
    pub fn exit_threshold(&self) -> f64 {
        self.epsilon.sqrt() * (1.0 - self.epsilon / 2.0)
    }
}

/// Smooth seeded jitter in `[0, amp/2]`, built from four harmonics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Jitter {
    pub amp: f64,
    coeffs: Vec<(f64, f64, f64)>, // (c, omega, phase)
    norm: f64,
}

impl Jitter {
    pub fn from_seed(seed: u64, amp: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(0.3..1.0),
                    rng.gen_range(0.3..1.7),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let norm = coeffs.iter().map(|c| c.0).sum();
        Jitter { amp, coeffs, norm }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.amp == 0.0 {
            return 0.0;
        }
        let s: f64 = self.coeffs.iter().map(|&(c, w, p)| c * (w * t + p).sin()).sum();
        self.amp * 0.25 * (1.0 + s / self.norm)
    }
}

/// Curvature profile with tagged bubble intervals.
#[derive(Debug, Clone)]
pub struct BubbleProfile {
    pub params: FamilyParams,
    /// Bubble intervals `(a_m, b_m)`, ascending and separated by at least
    /// `lambda_gap`.
    pub intervals: Vec<(f64, f64)>,
    pub seed: u64,
    pub jitter: Jitter,
}

/// Fraction of each bubble half-width occupied by the flat top.
const PLATEAU: f64 = 0.5;

fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

impl BubbleProfile {
    fn outside(&self, t: f64) -> f64 {
        -self.params.epsilon * (1.0 + self.jitter.eval(t))
    }

    /// Index of the bubble interval containing `t`, if any.
    pub fn interval_at(&self, t: f64) -> Option<usize> {
        let idx = self.intervals.partition_point(|&(_, b)| b < t);
        match self.intervals.get(idx) {
            Some(&(a, b)) if t >= a && t <= b => Some(idx),
            _ => None,
        }
    }

    /// Validate the invariants the constructors promise.
    pub fn check_admissible(&self) -> Result<(), ProfileError> {
        let p = &self.params;
        for (m, &(a, b)) in self.intervals.iter().enumerate() {
            if b <= a {
                return Err(ProfileError::LayoutError(format!("interval {m} is empty or reversed")));
            }
            if b - a > 2.0 * p.delta + 1e-12 {
                return Err(ProfileError::LayoutError(format!(
                    "interval {m} longer than 2 delta: {}",
                    b - a
                )));
            }
        }
        for m in 1..self.intervals.len() {
            let gap = self.intervals[m].0 - self.intervals[m - 1].1;
            if gap < p.lambda_gap - 1e-12 {
                return Err(ProfileError::LayoutError(format!(
                    "gap before interval {m} is {gap}, below lambda_gap {}",
                    p.lambda_gap
                )));
            }
        }
        for &(a, b) in &self.intervals {
            let mut sup = f64::NEG_INFINITY;
            for j in 0..=400 {
                let t = a + (b - a) * j as f64 / 400.0;
                sup = sup.max(self.eval(t));
            }
            if sup > p.kplus + 1e-12 {
                return Err(ProfileError::LayoutError(format!(
                    "interior curvature {sup} exceeds kplus {}",
                    p.kplus
                )));
            }
        }
        let (lo, hi) = self.span();
        for j in 0..=2000 {
            let t = lo - 2.0 + (hi - lo + 4.0) * j as f64 / 2000.0;
            if self.interval_at(t).is_none() && self.eval(t) > -p.epsilon + 1e-12 {
                return Err(ProfileError::LayoutError(format!(
                    "outside curvature above -epsilon at t = {t}"
                )));
            }
        }
        Ok(())
    }

    /// `[first a_m, last b_m]`, or `[0, 0]` for bubble-free profiles.
    pub fn span(&self) -> (f64, f64) {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(&(a, _)), Some(&(_, b))) => (a, b),
            _ => (0.0, 0.0),
        }
    }

    /// Serialize to the plain structured-text fixture format.
    pub fn to_fixture(&self) -> String {
        let fixture = ProfileFixture {
            epsilon: self.params.epsilon,
            delta: self.params.delta,
            k: self.params.k,
            lambda_gap: self.params.lambda_gap,
            kplus: self.params.kplus,
            mu: self.params.mu,
            seed: self.seed,
            jitter_amp: self.jitter.amp,
            intervals: self.intervals.clone(),
        };
        toml::to_string(&fixture).expect("profile fixture serializes")
    }

    pub fn from_fixture(text: &str) -> Result<Self, ProfileError> {
        let fx: ProfileFixture =
            toml::from_str(text).map_err(|e| ProfileError::LayoutError(e.to_string()))?;
        let params = FamilyParams {
            epsilon: fx.epsilon,
            delta: fx.delta,
            k: fx.k,
            lambda_gap: fx.lambda_gap,
            kplus: fx.kplus,
            mu: fx.mu,
        };
        Ok(BubbleProfile {
            params,
            intervals: fx.intervals,
            seed: fx.seed,
            jitter: Jitter::from_seed(fx.seed, fx.jitter_amp),
        })
    }
}

/// On-disk fixture: enough to rebuild the profile bit-for-bit.
#[derive(Debug, Serialize, Deserialize)]
struct ProfileFixture {
    epsilon: f64,
    delta: f64,
    k: usize,
    lambda_gap: f64,
    kplus: f64,
    mu: f64,
    seed: u64,
    jitter_amp: f64,
    intervals: Vec<(f64, f64)>,
}

impl Curvature for BubbleProfile {
    fn eval(&self, t: f64) -> f64 {
        let out = self.outside(t);
        match self.interval_at(t) {
            None => out,
            Some(m) => {
                let (a, b) = self.intervals[m];
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                let x = ((t - mid).abs() / half).min(1.0);
                // Flat top at kplus, C² taper back to the outside curve.
                let kappa = 1.0 - smoothstep5((x - PLATEAU) / (1.0 - PLATEAU));
                kappa * self.params.kplus + (1.0 - kappa) * out
            }
        }
    }

    fn domain(&self) -> Domain {
        Domain::All
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C2
    }

    fn bounds_hint(&self) -> Option<(f64, f64)> {
        Some((-1.5 * self.params.epsilon, self.params.kplus.max(-self.params.epsilon)))
    }
}

/// Build a deterministic profile from explicit intervals. `jitter_amp = 1`
/// gives the full jitter range `[0, 1/2]`; `0` leaves the outside curvature
/// at exactly `-ε`.
pub fn make_profile_with(
    params: FamilyParams,
    intervals: &[(f64, f64)],
    seed: u64,
    jitter_amp: f64,
) -> Result<BubbleProfile, ProfileError> {
    let mut iv = intervals.to_vec();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let profile =
        BubbleProfile { params, intervals: iv, seed, jitter: Jitter::from_seed(seed, jitter_amp) };
    profile.check_admissible()?;
    Ok(profile)
}

/// [`make_profile_with`] at full jitter.
pub fn make_profile(
    params: FamilyParams,
    intervals: &[(f64, f64)],
    seed: u64,
) -> Result<BubbleProfile, ProfileError> {
    make_profile_with(params, intervals, seed, 1.0)
}

/// Random admissible layout: `k` intervals with seeded lengths and gaps.
pub fn random_layout(params: &FamilyParams, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut t = rng.gen_range(-0.5..0.5);
    let mut out = Vec::with_capacity(params.k);
    for _ in 0..params.k {
        let len = params.delta * rng.gen_range(1.2..2.0);
        out.push((t, t + len));
        t += len + params.lambda_gap * rng.gen_range(1.0..1.4);
    }
    out
}

/// Report of [`verify_exit_bound`]: minimal margin of
/// `U(a_{m+1}) - √ε(1-ε/2)` over all gaps and entry values.
#[derive(Debug, Clone)]
pub struct ExitBoundReport {
    pub min_margin: f64,
    pub threshold: f64,
    pub cases: usize,
}

const ENTRY_GRID: [f64; 4] = [1e-4, 1e-2, 1.0, 10.0];

/// Integrate each inter-bubble gap from a grid of positive exit values and
/// check positivity throughout plus the `√ε(1-ε/2)` bound on arrival.
pub fn verify_exit_bound(profile: &BubbleProfile) -> Result<ExitBoundReport, ProfileError> {
    let threshold = profile.params.exit_threshold();
    let mut min_margin = f64::INFINITY;
    let mut cases = 0;
    for m in 1..profile.intervals.len() {
        let b_prev = profile.intervals[m - 1].1;
        let a_next = profile.intervals[m].0;
        for &u0 in &ENTRY_GRID {
            let sol =
                integrate_jacobi(profile, JacobiState::new(b_prev, 1.0, u0), a_next, DEFAULT_TOL)?;
            let traj = riccati_on_grid(&sol, b_prev, a_next, 1e-3);
            if !traj.is_complete() || traj.min_u() <= 0.0 {
                return Err(ProfileError::BoundViolated { m, u_exit: traj.min_u(), threshold });
            }
            let u_exit = sol.riccati_at(a_next);
            if u_exit <= threshold {
                return Err(ProfileError::BoundViolated { m, u_exit, threshold });
            }
            min_margin = min_margin.min(u_exit - threshold);
            cases += 1;
        }
    }
    Ok(ExitBoundReport { min_margin, threshold, cases })
}

/// Report of [`verify_bubble_crossing`].
#[derive(Debug, Clone)]
pub struct CrossingReport {
    /// Worst margin of the numeric solution over the constant floor
    /// `ε(1-ε/2)²`.
    pub min_floor_margin: f64,
    /// Worst margin over the linear integral-estimate floor.
    pub min_linear_margin: f64,
    pub floor: f64,
    pub cases: usize,
}

/// Cross each bubble from the worst-case entry `U(a_m) = √ε(1-ε/2)` and
/// check the numeric solution against both floors: the constant
/// `ε(1-ε/2)²` and the linear estimate
/// `U(a_m) - (ε(1-ε/2)² + K⁺)(t - a_m)`.
pub fn verify_bubble_crossing(profile: &BubbleProfile) -> Result<CrossingReport, ProfileError> {
    let p = &profile.params;
    let entry = p.exit_threshold();
    let floor = p.floor_theorem1();
    let mut min_floor_margin = f64::INFINITY;
    let mut min_linear_margin = f64::INFINITY;
    let mut cases = 0;
    for &(a, b) in &profile.intervals {
        let sol = integrate_jacobi(profile, JacobiState::new(a, 1.0, entry), b, DEFAULT_TOL)?;
        let traj = riccati_on_grid(&sol, a, b, 1e-4);
        for &(t, u) in &traj.samples {
            let linear = entry - (floor + p.kplus) * (t - a);
            if u <= floor {
                return Err(ProfileError::FloorViolated { t, u, floor });
            }
            if u < linear - 1e-9 {
                return Err(ProfileError::FloorViolated { t, u, floor: linear });
            }
            min_floor_margin = min_floor_margin.min(u - floor);
            min_linear_margin = min_linear_margin.min(u - linear);
        }
        cases += 1;
    }
    Ok(CrossingReport { min_floor_margin, min_linear_margin, floor, cases })
}

/// Verdict for one profile in a certification run.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileVerdict {
    pub index: usize,
    pub seed: u64,
    pub min_unstable: f64,
    pub max_stable: f64,
    pub separation: f64,
    pub cauchy_gap: f64,
    pub pass: bool,
}

/// Aggregate report of [`certify_theorem1`].
#[derive(Debug, Clone)]
pub struct AnosovProfileReport {
    pub params: FamilyParams,
    pub sign_tol: f64,
    pub separation_floor: f64,
    pub slack: f64,
    pub horizon_t: f64,
    pub verdicts: Vec<ProfileVerdict>,
    pub pass: bool,
}

impl AnosovProfileReport {
    pub fn worst(&self) -> Option<&ProfileVerdict> {
        self.verdicts.iter().min_by(|a, b| a.separation.total_cmp(&b.separation))
    }
}

/// Tolerances for certification runs.
#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub horizon_t: f64,
    pub sign_tol: f64,
    pub slack: f64,
    pub pair: PairOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { horizon_t: 40.0, sign_tol: 1e-8, slack: 1e-3, pair: PairOptions::default() }
    }
}

/// Check one profile: no-focal-points sign conditions on the finite-horizon
/// stable/unstable pair, and the separation floor `2ε(1-ε/2)² - slack`.
pub fn certify_profile(
    profile: &BubbleProfile,
    opts: &CertifyOptions,
) -> Result<ProfileVerdict, ProfileError> {
    let (lo, hi) = profile.span();
    let window = Window::new(lo - 1.0, hi + 1.0);
    let pair = stable_unstable_pair(profile, window, opts.horizon_t, &opts.pair)?;
    let min_u = pair.min_unstable();
    let max_s = pair.max_stable();
    let sep = pair.min_separation();
    let floor = 2.0 * profile.params.floor_theorem1();
    let pass = min_u >= -opts.sign_tol && max_s <= opts.sign_tol && sep >= floor - opts.slack;
    Ok(ProfileVerdict {
        index: 0,
        seed: profile.seed,
        min_unstable: min_u,
        max_stable: max_s,
        separation: sep,
        cauchy_gap: pair.cauchy_gap,
        pass,
    })
}

/// Certify `n_profiles` random admissible profiles drawn from `seed`.
/// Profiles are processed in parallel; the report is merged in index order,
/// so identical inputs give identical reports.
pub fn certify_theorem1(
    params: FamilyParams,
    n_profiles: usize,
    seed: u64,
    opts: &CertifyOptions,
) -> Result<AnosovProfileReport, ProfileError> {
    if !params.theorem1_admissible() {
        return Err(ProfileError::DomainError("params fail the Theorem 1 curvature bound"));
    }
    let profiles: Vec<BubbleProfile> = (0..n_profiles)
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let layout = random_layout(&params, &mut rng);
            make_profile(params, &layout, s)
        })
        .collect::<Result<_, _>>()?;
    let results: Vec<Result<ProfileVerdict, ProfileError>> = profiles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            certify_profile(p, opts).map(|mut v| {
                v.index = i;
                v
            })
        })
        .collect();
    let mut verdicts = Vec::with_capacity(n_profiles);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => verdicts.push(v),
            Err(e) => {
                return Err(ProfileError::CertificateFailed {
                    index: i,
                    seed: profiles[i].seed,
                    reason: e.to_string(),
                    fixture: profiles[i].to_fixture(),
                })
            }
        }
    }
    for v in &verdicts {
        if !v.pass {
            return Err(ProfileError::CertificateFailed {
                index: v.index,
                seed: v.seed,
                reason: format!(
                    "min_Uu = {:.3e}, max_Us = {:.3e}, separation = {:.6}",
                    v.min_unstable, v.max_stable, v.separation
                ),
                fixture: profiles[v.index].to_fixture(),
            });
        }
    }
    let pass = verdicts.iter().all(|v| v.pass);
    Ok(AnosovProfileReport {
        params,
        sign_tol: opts.sign_tol,
        separation_floor: 2.0 * params.floor_theorem1(),
        slack: opts.slack,
        horizon_t: opts.horizon_t,
        verdicts,
        pass,
    })
}
