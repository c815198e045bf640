//! Triangle mesh on the identified octagon, cotangent Laplacian, and a
//! conjugate-gradient Poisson solver.
//!
//! Vertices are generated on graded polar rings (fine near bump supports,
//! coarse elsewhere) plus matched boundary samples: samples on each
//! canonical side are mapped by the side pairing onto its partner, so the
//! identification is exact vertex-to-vertex and all eight corners glue to a
//! single vertex. Triangulation is a constrained Delaunay run in disk
//! coordinates — hyperbolic circles are Euclidean circles in the disk
//! model, so the empty-circumcircle property carries over to the metric.
//!
//! Stiffness weights use intrinsic edge lengths of the bumped metric
//! (Gauss–Legendre quadrature of `e^u` along hyperbolic geodesic edges) and
//! the flat cotangent formula per triangle; masses are lumped Heron areas.
//! Curvature corrections to both are `O(h²)` at mesh scale.

use crate::hyperbolic::{direction_towards, dist, geodesic_point, C};
use crate::surface::BubbledSurface;
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("mesh inconsistency: {0}")]
    Inconsistent(String),
    #[error("conjugate gradients stalled after {iterations} iterations at residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Mesh resolution knobs. `h_far` is the target (hyperbolic) edge length
/// away from bubbles; near a bump support the target drops to
/// `near_factor * delta`.
#[derive(Debug, Clone, Copy)]
pub struct MeshParams {
    pub h_far: f64,
    pub near_factor: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        // Tuned so the conformal exponent bound μ moves by about 1% under
        // the x2 refinement probe.
        MeshParams { h_far: 0.03, near_factor: 1.0 / 32.0 }
    }
}

impl MeshParams {
    /// Halve every target length (the `x2` refinement probe).
    pub fn refined(&self) -> MeshParams {
        MeshParams { h_far: self.h_far / 2.0, near_factor: self.near_factor / 2.0 }
    }
}

/// Triangle mesh of the closed surface with per-quotient-vertex fields.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    /// One representative chart position per quotient vertex.
    pub positions: Vec<C>,
    /// Quotient-vertex triangles.
    pub triangles: Vec<[usize; 3]>,
    /// Chart coordinates of each triangle corner (boundary triangles keep
    /// their own chart, which may differ from the representative).
    pub corners: Vec<[C; 3]>,
    /// Lumped vertex areas in the bumped metric.
    pub mass: Vec<f64>,
    /// Every chart point fed to the triangulation (boundary identification
    /// copies included) with its quotient vertex: the sample cloud for
    /// field interpolation near the identified boundary.
    pub chart_samples: Vec<(C, usize)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SurfaceMesh {
    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        // Each off-diagonal entry is one directed edge.
        (self.col_idx.len() - self.n_vertices()) / 2
    }

    /// `V - E + F`; must be `-2` for genus two.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    pub fn total_area(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Stiffness matrix-vector product `(L x)_i = Σ_j w_ij (x_i - x_j)`.
    pub fn stiffness_apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n_vertices() {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[idx] * x[self.col_idx[idx]];
            }
            out[i] = acc;
        }
    }

    /// Largest absolute row sum of the stiffness matrix (zero in exact
    /// arithmetic).
    pub fn max_row_sum(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_vertices() {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[idx];
            }
            worst = worst.max(acc.abs());
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_vertices()];
        for i in 0..self.n_vertices() {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[idx] == i {
                    d[i] = self.values[idx];
                }
            }
        }
        d
    }

    /// Jacobi-preconditioned conjugate gradients for `L w = b`. The system
    /// is consistent exactly when `b` sums to zero (the constants span the
    /// kernel); an inconsistent right-hand side makes the residual stall,
    /// which is reported as [`MeshError::NoConvergence`].
    pub fn cg_solve(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<CgOutcome, MeshError> {
        let n = self.n_vertices();
        assert_eq!(b.len(), n);
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            return Ok(CgOutcome { solution: vec![0.0; n], iterations: 0, residual: 0.0 });
        }
        let diag = self.diagonal();
        let precond = |r: &[f64], z: &mut [f64]| {
            for i in 0..n {
                z[i] = r[i] / diag[i].max(1e-300);
            }
        };
        let mut w = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z = vec![0.0; n];
        precond(&r, &mut z);
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let mut best = f64::INFINITY;
        let mut since_best = 0usize;
        for iter in 0..max_iter {
            self.stiffness_apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(MeshError::NoConvergence { iterations: iter, residual: best });
            }
            let alpha = rz / pap;
            for i in 0..n {
                w[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
            if res < rel_tol {
                return Ok(CgOutcome { solution: w, iterations: iter + 1, residual: res });
            }
            if res < best * 0.999 {
                best = res;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > 500 {
                    return Err(MeshError::NoConvergence { iterations: iter + 1, residual: res });
                }
            }
            precond(&r, &mut z);
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(MeshError::NoConvergence { iterations: max_iter, residual: best })
    }

    /// Relative residual `‖L w - b‖ / ‖b‖`.
    pub fn residual(&self, w: &[f64], b: &[f64]) -> f64 {
        let mut lw = vec![0.0; w.len()];
        self.stiffness_apply(w, &mut lw);
        let num: f64 = lw.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        num / den.max(1e-300)
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Hyperbolic-geodesic edge length in the bumped metric, by 4-point
/// Gauss–Legendre quadrature of `e^u` along the base geodesic.
fn edge_length(surface: &BubbledSurface, a: C, b: C) -> f64 {
    let ell = dist(a, b);
    if ell == 0.0 {
        return 0.0;
    }
    if surface.bumps.is_empty() {
        return ell;
    }
    const NODES: [f64; 4] = [0.06943184420297371, 0.33000947820757187, 0.6699905217924281, 0.9305681557970262];
    const WEIGHTS: [f64; 4] = [0.17392742256872693, 0.32607257743127305, 0.32607257743127305, 0.17392742256872693];
    let dir = direction_towards(a, b);
    let mut total = 0.0;
    for (s, w) in NODES.iter().zip(WEIGHTS) {
        let z = geodesic_point(a, dir, s * ell);
        total += w * surface.u(z).exp();
    }
    ell * total
}

/// Build the identified mesh on `surface`.
pub fn build_mesh(surface: &BubbledSurface, params: &MeshParams) -> Result<SurfaceMesh, MeshError> {
    let dom = &surface.domain;
    let h_far = params.h_far;

    // Local target edge length: graded toward each bump support.
    let target = |z: C| -> f64 {
        let mut h = h_far;
        for b in &surface.bumps {
            let hn = params.near_factor * b.delta;
            let d = (dist(z, b.center()) - 1.5 * b.delta).max(0.0);
            h = h.min(hn + 0.5 * d);
        }
        h
    };
    let ring_target = |r: f64| -> f64 {
        let mut h = h_far;
        for b in &surface.bumps {
            let rb = dist(C::new(0.0, 0.0), b.center());
            let hn = params.near_factor * b.delta;
            let d = ((r - rb).abs() - 1.5 * b.delta).max(0.0);
            h = h.min(hn + 0.5 * d);
        }
        h
    };

    // Chart points: quotient id per chart point.
    let mut chart_pts: Vec<C> = Vec::new();
    let mut quotient: Vec<usize> = Vec::new();
    let mut n_quotient = 0usize;

    // Corners first: eight chart copies, one quotient vertex.
    for k in 0..8 {
        chart_pts.push(dom.vertices[k]);
        quotient.push(0);
    }
    n_quotient += 1;

    // Boundary samples: canonical sides carry fresh ids, partners reuse
    // them through the exact pairing image.
    let side_len = dist(dom.vertices[0], dom.vertices[1]);
    let n_b = (side_len / h_far).ceil() as usize;
    let mut side_chart_indices: [Vec<usize>; 8] = Default::default();
    for &k in &[0usize, 1, 4, 5] {
        let j = dom.partner[k];
        let a = dom.vertices[k];
        let dir = direction_towards(a, dom.vertices[(k + 1) % 8]);
        let g_inv = dom.pairings[k].inverse();
        let mut canon_idx = Vec::with_capacity(n_b + 1);
        let mut image_idx = Vec::with_capacity(n_b + 1);
        canon_idx.push(k); // chart index of corner v_k
        // The image polyline traverses side j backward: G_k⁻¹(v_k) = v_{j+1}.
        image_idx.push((j + 1) % 8);
        for m in 1..n_b {
            let p = geodesic_point(a, dir, side_len * m as f64 / n_b as f64);
            let id = n_quotient;
            n_quotient += 1;
            chart_pts.push(p);
            quotient.push(id);
            canon_idx.push(chart_pts.len() - 1);
            // Partner copy: same quotient vertex, image chart position.
            chart_pts.push(g_inv.apply(p));
            quotient.push(id);
            image_idx.push(chart_pts.len() - 1);
        }
        canon_idx.push((k + 1) % 8);
        image_idx.push(j); // G_k⁻¹(v_{k+1}) = v_j
        side_chart_indices[k] = canon_idx;
        side_chart_indices[j] = image_idx;
    }

    // Interior lattice on graded polar rings.
    chart_pts.push(C::new(0.0, 0.0));
    quotient.push(n_quotient);
    n_quotient += 1;
    let mut r = 0.0f64;
    loop {
        r += ring_target(r);
        if r >= dom.circumradius {
            break;
        }
        // Angular density by inverse CDF of 1/target along the ring.
        const M: usize = 720;
        let mut weights = [0.0f64; M];
        let mut total = 0.0;
        for (j, wj) in weights.iter_mut().enumerate() {
            let theta = (j as f64 + 0.5) * std::f64::consts::TAU / M as f64;
            let z = C::from_polar((r / 2.0).tanh(), theta);
            *wj = r.sinh() * std::f64::consts::TAU / M as f64 / target(z);
            total += *wj;
        }
        let n_pts = total.round().max(6.0) as usize;
        let mut cum = 0.0;
        let mut next = 0.5 * total / n_pts as f64;
        let mut placed = 0;
        for (j, wj) in weights.iter().enumerate() {
            cum += wj;
            while cum >= next && placed < n_pts {
                let frac = 1.0 - (cum - next) / wj;
                let theta = (j as f64 + frac) * std::f64::consts::TAU / M as f64;
                next += total / n_pts as f64;
                placed += 1;
                let z = C::from_polar((r / 2.0).tanh(), theta);
                // Keep clear of the boundary so constraint edges stay
                // locally Delaunay.
                if dom.boundary_radius(theta) - r < 0.8 * target(z) {
                    continue;
                }
                chart_pts.push(z);
                quotient.push(n_quotient);
                n_quotient += 1;
            }
        }
    }

    // Constrained Delaunay in disk coordinates.
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut handle_of = Vec::with_capacity(chart_pts.len());
    for p in &chart_pts {
        let h = cdt
            .insert(Point2::new(p.re, p.im))
            .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
        handle_of.push(h);
    }
    for side in &side_chart_indices {
        for w in side.windows(2) {
            if cdt.can_add_constraint(handle_of[w[0]], handle_of[w[1]]) {
                cdt.add_constraint(handle_of[w[0]], handle_of[w[1]]);
            } else {
                return Err(MeshError::Triangulation(
                    "boundary constraint would intersect an existing constraint".into(),
                ));
            }
        }
    }
    let mut handle_to_chart = HashMap::new();
    for (chart, h) in handle_of.iter().enumerate() {
        handle_to_chart.insert(h.index(), chart);
    }

    // Extract faces whose centroid lies inside (or marginally on) the
    // octagon; the rest sit in the convex-hull pockets outside the arcs.
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut corners: Vec<[C; 3]> = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let mut chart_idx = [0usize; 3];
        let mut pos = [C::new(0.0, 0.0); 3];
        for (slot, v) in vs.iter().enumerate() {
            let chart = handle_to_chart[&v.fix().index()];
            chart_idx[slot] = chart;
            pos[slot] = chart_pts[chart];
        }
        let centroid = (pos[0] + pos[1] + pos[2]) / 3.0;
        let (_, margin) = dom.worst_side(centroid);
        if margin < -1e-9 {
            continue;
        }
        triangles.push([
            quotient[chart_idx[0]],
            quotient[chart_idx[1]],
            quotient[chart_idx[2]],
        ]);
        corners.push(pos);
    }

    // Representative positions.
    let mut positions = vec![C::new(0.0, 0.0); n_quotient];
    for (chart, &q) in quotient.iter().enumerate() {
        positions[q] = chart_pts[chart];
    }
    let chart_samples: Vec<(C, usize)> =
        chart_pts.into_iter().zip(quotient.iter().copied()).collect();

    assemble(surface, positions, triangles, corners, chart_samples)
}

fn assemble(
    surface: &BubbledSurface,
    positions: Vec<C>,
    triangles: Vec<[usize; 3]>,
    corners: Vec<[C; 3]>,
    chart_samples: Vec<(C, usize)>,
) -> Result<SurfaceMesh, MeshError> {
    let n = positions.len();
    let mut mass = vec![0.0f64; n];
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
    for (tri, pos) in triangles.iter().zip(&corners) {
        let l = [
            edge_length(surface, pos[1], pos[2]),
            edge_length(surface, pos[2], pos[0]),
            edge_length(surface, pos[0], pos[1]),
        ];
        let s = 0.5 * (l[0] + l[1] + l[2]);
        let area_sq = s * (s - l[0]) * (s - l[1]) * (s - l[2]);
        if !(area_sq > 0.0) {
            return Err(MeshError::Inconsistent(format!(
                "degenerate triangle with edge lengths {l:?}"
            )));
        }
        let area = area_sq.sqrt();
        for corner in 0..3 {
            mass[tri[corner]] += area / 3.0;
            // Cotangent of the angle at `corner`, opposite edge `corner`.
            let (a, b, c) = (l[corner], l[(corner + 1) % 3], l[(corner + 2) % 3]);
            let cot = (b * b + c * c - a * a) / (4.0 * area);
            let (i, j) = (tri[(corner + 1) % 3], tri[(corner + 2) % 3]);
            let w = 0.5 * cot;
            *entries.entry((i, j)).or_insert(0.0) -= w;
            *entries.entry((j, i)).or_insert(0.0) -= w;
            *entries.entry((i, i)).or_insert(0.0) += w;
            *entries.entry((j, j)).or_insert(0.0) += w;
        }
    }
    // CSR with sorted columns.
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(i, j), &v) in &entries {
        by_row[i].push((j, v));
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for row in &mut by_row {
        row.sort_by_key(|e| e.0);
        for &(j, v) in row.iter() {
            col_idx.push(j);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    let mesh =
        SurfaceMesh { positions, triangles, corners, mass, chart_samples, row_ptr, col_idx, values };
    let chi = mesh.euler_characteristic();
    if chi != -2 {
        return Err(MeshError::Inconsistent(format!("Euler characteristic {chi}, expected -2")));
    }
    if mesh.mass.iter().any(|&m| m <= 0.0) {
        return Err(MeshError::Inconsistent("vertex with vanishing lumped mass".into()));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare() -> BubbledSurface {
        BubbledSurface::new(vec![], 0.5, 0).unwrap()
    }

    fn bumped() -> BubbledSurface {
        BubbledSurface::new(
            vec![crate::surface::Bump { x: 0.0, y: 0.0, delta: 0.05, amplitude: 3e-4 }],
            0.5,
            0,
        )
        .unwrap()
    }

    #[test]
    fn euler_characteristic_is_genus_two() {
        let mesh = build_mesh(&bare(), &MeshParams::default()).unwrap();
        assert_eq!(mesh.euler_characteristic(), -2);
        assert!(mesh.n_vertices() > 1000);
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = build_mesh(&bumped(), &MeshParams::default()).unwrap();
        assert!(mesh.max_row_sum() < 1e-12, "row sum {}", mesh.max_row_sum());
    }

    #[test]
    fn total_area_matches_quadrature_volume() {
        let s = bumped();
        let mesh = build_mesh(&s, &MeshParams::default()).unwrap();
        let vol = s.volume(512, 1024);
        let rel = (mesh.total_area() - vol).abs() / vol;
        assert!(rel < 2e-3, "area mismatch {rel}");
    }

    #[test]
    fn cg_solves_consistent_system() {
        let mesh = build_mesh(&bare(), &MeshParams::default()).unwrap();
        let n = mesh.n_vertices();
        // Manufactured solution: smooth chart function, discrete forcing.
        let w0: Vec<f64> = mesh.positions.iter().map(|p| (3.0 * p.re).sin() * p.im).collect();
        let mut b = vec![0.0; n];
        mesh.stiffness_apply(&w0, &mut b);
        let out = mesh.cg_solve(&b, 1e-12, 40_000).unwrap();
        // Solutions agree up to an additive constant.
        let shift = w0[0] - out.solution[0];
        let err = w0
            .iter()
            .zip(&out.solution)
            .map(|(a, b)| (a - b - shift).abs())
            .fold(0.0f64, f64::max);
        let scale = w0.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        assert!(err / scale < 1e-6, "recovery error {}", err / scale);
    }

    #[test]
    fn cg_stalls_on_inconsistent_rhs() {
        let mesh = build_mesh(&bare(), &MeshParams::default()).unwrap();
        let b = vec![1.0; mesh.n_vertices()]; // constant: orthogonal to range
        let err = mesh.cg_solve(&b, 1e-10, 40_000).unwrap_err();
        match err {
            MeshError::NoConvergence { residual, .. } => {
                assert!(residual > 1e-3, "stalled residual {residual}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cg_deterministic() {
        let mesh = build_mesh(&bumped(), &MeshParams::default()).unwrap();
        let b: Vec<f64> = {
            let mut v: Vec<f64> =
                mesh.positions.iter().map(|p| p.re - p.im * p.im).collect();
            let mean: f64 =
                v.iter().zip(&mesh.mass).map(|(x, m)| x * m).sum::<f64>() / mesh.total_area();
            for (x, m) in v.iter_mut().zip(&mesh.mass) {
                *x = (*x - mean) * m;
            }
            v
        };
        let s1 = mesh.cg_solve(&b, 1e-10, 40_000).unwrap();
        let s2 = mesh.cg_solve(&b, 1e-10, 40_000).unwrap();
        assert_eq!(s1.solution, s2.solution);
        assert_eq!(s1.iterations, s2.iterations);
    }
}
