//! Poincaré-disk model primitives and the regular genus-two octagon.
//!
//! The hyperbolic plane is the unit disk with metric `λ(z)²|dz|²`,
//! `λ(z) = 2/(1-|z|²)` (curvature -1). Orientation-preserving isometries are
//! the disk Möbius transformations, kept here in SU(1,1) form
//! `z ↦ (az + b)/(b̄z + ā)` with `|a|² - |b|² = 1`, so composition is matrix
//! multiplication and `T'(z) = 1/(b̄z + ā)²`.
//!
//! The fundamental domain is the regular hyperbolic octagon with interior
//! angles `π/4` (circumradius `arccosh(3 + 2√2) ≈ 2.448`), whose sides are
//! identified in the pattern `a b a⁻¹ b⁻¹ c d c⁻¹ d⁻¹`: all eight corners
//! glue to a single vertex of total angle `2π`, yielding a closed genus-two
//! surface of constant curvature -1.

use num_complex::Complex64;

pub type C = Complex64;

/// Conformal factor of the disk metric, `λ(z) = 2/(1-|z|²)`.
pub fn lambda(z: C) -> f64 {
    2.0 / (1.0 - z.norm_sqr())
}

/// Hyperbolic distance `2 artanh |(z-w)/(1-w̄z)|`.
pub fn dist(z: C, w: C) -> f64 {
    let m = ((z - w) / (C::new(1.0, 0.0) - w.conj() * z)).norm();
    2.0 * m.atanh()
}

/// Möbius transformation of the disk in SU(1,1) form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: C,
    pub b: C,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius { a: C::new(1.0, 0.0), b: C::new(0.0, 0.0) };

    /// `z ↦ (z - p)/(1 - p̄z)`, sending `p` to the origin. Its differential
    /// at `p` is the positive real `1/(1-|p|²)`: directions at `p` keep
    /// their disk-chart angle at the origin.
    pub fn to_origin(p: C) -> Mobius {
        let s = 1.0 / (1.0 - p.norm_sqr()).sqrt();
        Mobius { a: C::new(s, 0.0), b: -p * s }
    }

    /// Rotation by `phi` about the origin.
    pub fn rotation(phi: f64) -> Mobius {
        Mobius { a: C::from_polar(1.0, phi / 2.0), b: C::new(0.0, 0.0) }
    }

    /// The unique orientation-preserving isometry with `T(p) = q` and
    /// `T(r) = s`; requires `dist(p, r) == dist(q, s)`.
    pub fn matching(p: C, q: C, r: C, s: C) -> Mobius {
        let mp = Mobius::to_origin(p);
        let mq = Mobius::to_origin(q);
        let phi = mq.apply(s).arg() - mp.apply(r).arg();
        mq.inverse().compose(&Mobius::rotation(phi)).compose(&mp)
    }

    pub fn apply(&self, z: C) -> C {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    /// Complex derivative `T'(z) = 1/(b̄z + ā)²`.
    pub fn derivative(&self, z: C) -> C {
        let d = self.b.conj() * z + self.a.conj();
        (d * d).inv()
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.a.conj(), b: -self.b }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
    }

    /// Renormalize `|a|² - |b|²` to 1 (drift control after long products).
    pub fn renormalized(&self) -> Mobius {
        let n = (self.a.norm_sqr() - self.b.norm_sqr()).sqrt();
        Mobius { a: self.a / n, b: self.b / n }
    }

    /// Whether two transformations agree as maps (up to the ± matrix sign).
    pub fn approx_eq(&self, other: &Mobius, tol: f64) -> bool {
        let same = (self.a - other.a).norm() + (self.b - other.b).norm();
        let flip = (self.a + other.a).norm() + (self.b + other.b).norm();
        same.min(flip) < tol
    }
}

/// Point of the unit-speed geodesic from `p` with initial disk-chart
/// direction `theta`, after arc length `t`.
pub fn geodesic_point(p: C, theta: f64, t: f64) -> C {
    let m = Mobius::to_origin(p);
    m.inverse().apply(C::from_polar((t / 2.0).tanh(), theta))
}

/// Disk-chart direction at `z` of the geodesic from `z` to `p`.
pub fn direction_towards(z: C, p: C) -> f64 {
    Mobius::to_origin(z).apply(p).arg()
}

/// Euclidean gradient of `z ↦ dist(z, p)`, as a complex number
/// `∂x d + i ∂y d`. Magnitude is `λ(z)`; undefined at `z = p`.
pub fn dist_gradient(z: C, p: C) -> C {
    let t = Mobius::to_origin(p);
    let w = t.apply(z);
    let m = w.norm();
    let dt = t.derivative(z);
    w * dt.conj() * (2.0 / ((1.0 - m * m) * m))
}

/// Hyperbolic circumradius of the regular octagon with angle `π/4`:
/// `arccosh(3 + 2√2)`.
pub fn octagon_circumradius() -> f64 {
    (3.0 + 2.0 * 2f64.sqrt()).acosh()
}

/// A side of the octagon: the Euclidean circle carrying its geodesic, plus
/// the polar data of the line.
#[derive(Debug, Clone, Copy)]
pub struct Side {
    pub center: C,
    pub radius: f64,
    /// Direction of the closest point to the origin.
    pub foot_angle: f64,
}

impl Side {
    /// Signed margin: positive on the origin side of the geodesic.
    pub fn margin(&self, z: C) -> f64 {
        (z - self.center).norm() - self.radius
    }
}

/// The regular genus-two octagon with its side pairings.
#[derive(Debug, Clone)]
pub struct FuchsianDomain {
    pub vertices: [C; 8],
    pub sides: [Side; 8],
    /// `pairings[k]` maps side `partner[k]` onto side `k`; its image of the
    /// octagon is the neighboring copy across side `k`.
    pub pairings: [Mobius; 8],
    pub partner: [usize; 8],
    pub circumradius: f64,
    pub inradius: f64,
}

// Side labels run a b a⁻¹ b⁻¹ c d c⁻¹ d⁻¹ around the boundary, so side k
// glues to side k+2 within each half.
const PARTNER: [usize; 8] = [2, 3, 0, 1, 6, 7, 4, 5];

impl FuchsianDomain {
    pub fn regular_genus2() -> FuchsianDomain {
        let rc = octagon_circumradius();
        let rho = (rc / 2.0).tanh(); // Euclidean vertex radius, 2^(-1/4)
        let vertices: [C; 8] =
            std::array::from_fn(|k| C::from_polar(rho, k as f64 * std::f64::consts::FRAC_PI_4));
        let sides: [Side; 8] = std::array::from_fn(|k| {
            let (v1, v2) = (vertices[k], vertices[(k + 1) % 8]);
            // Circle orthogonal to the unit circle through both vertices:
            // |c|² = r² + 1 and |v - c| = r give 2 Re(c̄v) = |v|² + 1.
            let (x1, y1, x2, y2) = (v1.re, v1.im, v2.re, v2.im);
            let (b1, b2) = (v1.norm_sqr() + 1.0, v2.norm_sqr() + 1.0);
            let det = 2.0 * (x1 * y2 - x2 * y1);
            let cx = (b1 * y2 - b2 * y1) / det;
            let cy = (x1 * b2 - x2 * b1) / det;
            let center = C::new(cx, cy);
            Side {
                center,
                radius: (center.norm_sqr() - 1.0).sqrt(),
                foot_angle: (k as f64 + 0.5) * std::f64::consts::FRAC_PI_4,
            }
        });
        let pairings: [Mobius; 8] = std::array::from_fn(|k| {
            let j = PARTNER[k];
            // Orientation-reversing gluing of the boundary word: side j
            // traversed forward lands on side k traversed backward.
            Mobius::matching(vertices[j], vertices[(k + 1) % 8], vertices[(j + 1) % 8], vertices[k])
        });
        let inradius = ((rc.tanh()) * (std::f64::consts::FRAC_PI_8).cos()).atanh();
        FuchsianDomain { vertices, sides, pairings, partner: PARTNER, circumradius: rc, inradius }
    }

    pub fn contains(&self, z: C) -> bool {
        self.sides.iter().all(|s| s.margin(z) >= 0.0)
    }

    /// Index and value of the most violated side margin.
    pub fn worst_side(&self, z: C) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, s) in self.sides.iter().enumerate() {
            let m = s.margin(z);
            if m < best.1 {
                best = (k, m);
            }
        }
        best
    }

    /// Hyperbolic distance from the origin to the boundary along `theta`.
    pub fn boundary_radius(&self, theta: f64) -> f64 {
        let td = self.inradius.tanh();
        self.sides
            .iter()
            .map(|s| {
                let c = (theta - s.foot_angle).cos();
                if c > td {
                    (td / c).atanh()
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Pull a point just outside side `k` back into the domain, updating the
    /// disk-chart direction `theta`.
    pub fn pull_back(&self, k: usize, z: C, theta: f64) -> (C, f64) {
        let g_inv = self.pairings[k].inverse();
        let z2 = g_inv.apply(z);
        let theta2 = theta + g_inv.derivative(z).arg();
        (z2, theta2)
    }

    /// Distance from `z` to the nearest octagon vertex.
    pub fn corner_distance(&self, z: C) -> f64 {
        self.vertices.iter().map(|&v| dist(z, v)).fold(f64::INFINITY, f64::min)
    }

    /// Map an arbitrary disk point into the fundamental domain by repeated
    /// side-pairing pullbacks. Returns the reduced point and the deck
    /// transformation `g` with `z = g(reduced)`.
    pub fn reduce(&self, z: C) -> (C, Mobius) {
        let mut zc = z;
        let mut deck = Mobius::IDENTITY;
        for _ in 0..64 {
            let (k, m) = self.worst_side(zc);
            if m >= -1e-14 {
                return (zc, deck);
            }
            let g_inv = self.pairings[k].inverse();
            zc = g_inv.apply(zc);
            deck = deck.compose(&self.pairings[k]).renormalized();
        }
        (zc, deck)
    }
}
