//! Adaptive Dormand–Prince 5(4) integration.
//!
//! A small explicit stepper tailored to the needs of the rest of the crate:
//! fixed-size state vectors, forward and backward integration, per-step
//! access for event localization, and cubic Hermite dense output. The
//! controller is the classic `0.9 * err^(-1/5)` step-size update with an
//! embedded 4th-order error estimate.

use thiserror::Error;

/// `(rel_tol, abs_tol)` pair used by the error norm.
pub type Tol = (f64, f64);

/// Default tolerances used throughout the crate.
pub const DEFAULT_TOL: Tol = (1e-10, 1e-12);

#[derive(Debug, Error, PartialEq, Clone)]
pub enum OdeError {
    /// The controller shrank the step below the representable limit without
    /// meeting the tolerance. Signals a pathological right-hand side.
    #[error("step underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exceeded")]
    TooManySteps(usize),
}

/// One accepted step, with enough data for cubic Hermite dense output.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub f0: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> Step<N> {
    /// Cubic Hermite interpolation of the state at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i];
        }
        y
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t0 <= self.t1 { (self.t0, self.t1) } else { (self.t1, self.t0) };
        (lo..=hi).contains(&t)
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// b5 - b4: error estimator weights (k7 = FSAL stage).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 50_000_000;

/// Single-trajectory adaptive stepper. Create with [`Dopri5::new`], then call
/// [`Dopri5::step`] until [`Dopri5::done`].
pub struct Dopri5<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]> {
    rhs: F,
    pub t: f64,
    pub y: [f64; N],
    f: [f64; N],
    t_end: f64,
    h: f64,
    dir: f64,
    rel: f64,
    abs: f64,
    h_max: f64,
    steps: usize,
    rejected_last: bool,
}

impl<const N: usize, F: FnMut(f64, &[f64; N]) -> [f64; N]> Dopri5<N, F> {
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], t_end: f64, tol: Tol) -> Self {
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let f = rhs(t0, &y0);
        let span = (t_end - t0).abs().max(1e-6);
        let h = dir * (1e-3 * span).min(1e-2);
        Dopri5 {
            rhs,
            t: t0,
            y: y0,
            f,
            t_end,
            h,
            dir,
            rel: tol.0,
            abs: tol.1,
            h_max: f64::INFINITY,
            steps: 0,
            rejected_last: false,
        }
    }

    /// Cap the step size. Useful when dense output between steps must stay
    /// accurate: the cubic Hermite error grows like `h⁴`, independent of the
    /// integration tolerance.
    pub fn set_max_step(&mut self, h_max: f64) {
        assert!(h_max > 0.0);
        self.h_max = h_max;
    }

    pub fn done(&self) -> bool {
        (self.t_end - self.t) * self.dir <= 0.0
    }

    /// Rescale the current state and derivative by `factor`. Only valid for
    /// linear systems, where scaling a solution yields another solution; used
    /// to keep exponentially growing Jacobi fields inside f64 range.
    pub fn rescale(&mut self, factor: f64) {
        for i in 0..N {
            self.y[i] *= factor;
            self.f[i] *= factor;
        }
    }

    /// Advance by one accepted step (clipped to `t_end`).
    pub fn step(&mut self) -> Result<Step<N>, OdeError> {
        let mut h = if self.h.abs() > self.h_max { self.dir * self.h_max } else { self.h };
        loop {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                return Err(OdeError::TooManySteps(MAX_STEPS));
            }
            // Clip so stage abscissae stay inside [t, t_end].
            if (self.t + h - self.t_end) * self.dir > 0.0 {
                h = self.t_end - self.t;
            }
            if h.abs() < 1e-14 * (self.t.abs().max(1.0)) {
                return Err(OdeError::StepUnderflow { t: self.t, h });
            }

            let mut k = [[0.0; N]; 7];
            k[0] = self.f;
            for s in 1..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += h * a * kj[i];
                        }
                    }
                }
                k[s] = (self.rhs)(self.t + C[s] * h, &ys);
            }
            // Stage 6 already lands on the 5th-order solution (FSAL).
            let mut y1 = self.y;
            for (j, kj) in k.iter().enumerate().take(6) {
                let a = A[6][j];
                if a != 0.0 {
                    for i in 0..N {
                        y1[i] += h * a * kj[i];
                    }
                }
            }
            debug_assert_eq!(C[6], 1.0);

            let mut err = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                e *= h;
                let scale = self.abs + self.rel * self.y[i].abs().max(y1[i].abs());
                let r = e / scale;
                err += r * r;
            }
            err = (err / N as f64).sqrt();
            if !err.is_finite() {
                err = 1e30;
            }

            if err <= 1.0 {
                let rec = Step { t0: self.t, t1: self.t + h, y0: self.y, y1, f0: k[0], f1: k[6] };
                self.t += h;
                self.y = y1;
                self.f = k[6];
                let mut fac = 0.9 * err.max(1e-30).powf(-0.2);
                fac = fac.clamp(0.2, if self.rejected_last { 1.0 } else { 5.0 });
                self.h = (h * fac).clamp(-self.h_max, self.h_max);
                self.rejected_last = false;
                return Ok(rec);
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            h *= fac;
            self.rejected_last = true;
        }
    }
}

/// Integrate to `t_end`, collecting all accepted steps.
pub fn integrate_collect<const N: usize>(
    rhs: impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: Tol,
) -> Result<Vec<Step<N>>, OdeError> {
    let mut solver = Dopri5::new(rhs, t0, y0, t_end, tol);
    let mut steps = Vec::new();
    while !solver.done() {
        steps.push(solver.step()?);
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_growth_matches_closed_form() {
        let steps = integrate_collect(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 5.0, DEFAULT_TOL).unwrap();
        let last = steps.last().unwrap();
        assert_relative_eq!(last.y1[0], 5f64.exp(), max_relative = 1e-9);
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let tau = 20.0 * std::f64::consts::PI;
        let steps =
            integrate_collect(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], tau, DEFAULT_TOL)
                .unwrap();
        let last = steps.last().unwrap();
        assert!((last.y1[0] - 1.0).abs() < 1e-8, "cos drift {}", (last.y1[0] - 1.0).abs());
        assert!(last.y1[1].abs() < 1e-8);
    }

    #[test]
    fn backward_integration() {
        let steps =
            integrate_collect(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], -3.0, DEFAULT_TOL).unwrap();
        let last = steps.last().unwrap();
        assert_relative_eq!(last.y1[0], (-3f64).exp(), max_relative = 1e-9);
        assert!(last.t1 == -3.0);
    }

    #[test]
    fn dense_output_accuracy_scales_with_max_step() {
        // Cubic Hermite error is O(h⁴); a capped step keeps it tight.
        let mut solver = Dopri5::new(|t, _y: &[f64; 1]| [t.cos()], 0.0, [0.0], 3.0, (1e-9, 1e-12));
        solver.set_max_step(0.05);
        while !solver.done() {
            let st = solver.step().unwrap();
            assert!(st.t1 - st.t0 <= 0.05 + 1e-12);
            let tm = 0.5 * (st.t0 + st.t1);
            let y = st.eval(tm);
            // Interpolation error bound: h⁴ max|y⁗| / 384 ≈ 1.6e-8 here.
            assert!((y[0] - tm.sin()).abs() < 3e-8);
        }
    }

    #[test]
    fn endpoint_is_exact() {
        let steps =
            integrate_collect(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 1.7, DEFAULT_TOL).unwrap();
        assert_eq!(steps.last().unwrap().t1, 1.7);
    }
}
