//! Numerical certificates for Anosov geodesic flows on surfaces with small
//! regions of positive curvature.
//!
//! The library builds genus-two hyperbolic surfaces carrying conformal
//! curvature "bubbles", integrates Jacobi and Riccati equations along their
//! geodesics, and checks explicit comparison bounds: sign conditions on the
//! stable/unstable Riccati solutions (no focal points), a quantitative
//! separation between them (hyperbolicity), and the behaviour of both along a
//! conformal deformation path `g_ρ = e^{2ρw} g` that removes the positive
//! curvature entirely.
//!
//! Entry points, roughly bottom-up:
//!
//! * [`ode`] — adaptive Dormand–Prince 5(4) stepper with dense output.
//! * [`riccati`] — scalar Jacobi fields, Riccati trajectories, blow-up
//!   detection, stable/unstable boundary-value limits, comparison checks.
//! * [`profiles`] — synthetic curvature profiles along a geodesic with
//!   tagged bubble intervals, the explicit admissibility bounds, and the
//!   profile-level certificate.
//! * [`hyperbolic`] / [`surface`] — Poincaré-disk model, the regular
//!   octagon with genus-two side pairings, conformal bumps, geodesic flow
//!   with fundamental-domain wrapping.
//! * [`mesh`] / [`deform`] — cotangent Laplacian on the identified octagon
//!   mesh, Poisson solve for the conformal factor, and the deformation path
//!   with its property checks.
//! * [`certify`] — end-to-end certificates along sampled geodesics of the
//!   deformed metrics.
//! * [`report`] / [`config`] — CSV/SVG/text emission and run configuration
//!   for the `anosov` command-line tool.

pub mod certify;
pub mod config;
pub mod deform;
pub mod hyperbolic;
pub mod mesh;
pub mod ode;
pub mod profiles;
pub mod report;
pub mod riccati;
pub mod surface;

pub mod guide;

pub use riccati::{Curvature, Domain, JacobiState, RiccatiTrajectory, StableUnstablePair};
