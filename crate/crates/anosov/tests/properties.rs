//! Property tests for the closed forms and constructors.

use anosov::hyperbolic::{dist, Mobius, C};
use anosov::ode::DEFAULT_TOL;
use anosov::profiles::{lambda_of_epsilon, make_profile_with, BubbleProfile, FamilyParams};
use anosov::riccati::{constant_curvature_riccati, integrate_jacobi, ConstantCurvature, JacobiState};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..Default::default() })]

    /// The tanh addition law agrees with direct integration of the Jacobi
    /// system away from poles.
    #[test]
    fn constant_curvature_closed_form_matches_integration(
        eps in 0.05f64..2.0,
        u0 in -0.9f64..3.0,
        t in 0.1f64..4.0,
    ) {
        // U0 > -sqrt(eps) stays pole-free forward in time.
        prop_assume!(u0 > -0.9 * eps.sqrt());
        let exact = constant_curvature_riccati(eps, u0, t).unwrap();
        let sol = integrate_jacobi(
            &ConstantCurvature(-eps),
            JacobiState::new(0.0, 1.0, u0),
            t,
            DEFAULT_TOL,
        ).unwrap();
        prop_assert!((sol.riccati_at(t) - exact).abs() < 1e-8);
    }

    /// Profile construction is idempotent under its own admissibility
    /// checker and survives a fixture round trip bit-for-bit.
    #[test]
    fn profiles_admissible_and_roundtrip(
        seed in 0u64..10_000,
        gap_scale in 1.0f64..1.6,
        len_scale in 1.2f64..2.0,
        jitter in 0.0f64..1.0,
    ) {
        let params = FamilyParams::new(0.5, 0.1, 2, 1.5, 0.5).unwrap();
        let len = params.delta * len_scale;
        let a2 = len + params.lambda_gap * gap_scale;
        let profile = make_profile_with(params, &[(0.0, len), (a2, a2 + len)], seed, jitter).unwrap();
        profile.check_admissible().unwrap();
        let rebuilt = BubbleProfile::from_fixture(&profile.to_fixture()).unwrap();
        for j in 0..50 {
            let t = -1.0 + j as f64 * 0.12;
            prop_assert_eq!(anosov::riccati::Curvature::eval(&profile, t),
                            anosov::riccati::Curvature::eval(&rebuilt, t));
        }
    }

    /// The gap constant is exactly the tanh inverse of the exit threshold.
    #[test]
    fn lambda_inverts_tanh(eps in 0.01f64..0.99) {
        let lam = lambda_of_epsilon(eps).unwrap();
        prop_assert!(((eps.sqrt() * lam).tanh() - (1.0 - eps / 2.0)).abs() < 1e-12);
    }

    /// Disk isometries preserve hyperbolic distance and compose like their
    /// matrices.
    #[test]
    fn mobius_isometry_and_composition(
        ax in -0.6f64..0.6, ay in -0.6f64..0.6,
        bx in -0.6f64..0.6, by in -0.6f64..0.6,
        phi in 0.0f64..std::f64::consts::TAU,
        zx in -0.7f64..0.7, zy in -0.7f64..0.7,
        wx in -0.7f64..0.7, wy in -0.7f64..0.7,
    ) {
        prop_assume!(ax * ax + ay * ay < 0.8 && bx * bx + by * by < 0.8);
        let t1 = Mobius::rotation(phi).compose(&Mobius::to_origin(C::new(ax, ay)));
        let t2 = Mobius::to_origin(C::new(bx, by));
        let (z, w) = (C::new(zx, zy), C::new(wx, wy));
        prop_assert!((dist(t1.apply(z), t1.apply(w)) - dist(z, w)).abs() < 1e-10);
        let composed = t2.compose(&t1);
        prop_assert!((composed.apply(z) - t2.apply(t1.apply(z))).norm() < 1e-12);
    }
}
