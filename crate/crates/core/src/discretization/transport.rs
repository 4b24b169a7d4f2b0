//! L² comparison of P1 fields living on two different meshes.
//!
//! Fields are extended by zero outside their own mesh, so
//! `‖u − ũ‖²_{L²(Ω∪Ω̃)} = ∫_Ω |u − 1_Ω̃ ũ|² + ∫_{Ω̃∖Ω} |ũ|²`. Both integrals use a
//! uniform sub-triangulation of every element with a degree-2 rule on each
//! piece; elements cut by the other mesh's boundary are refined further.

use super::mesh::Mesh;
use crate::quadrature::{subdivide, TRI3_INTERIOR};

const BARY_TOL: f64 = 1e-12;

/// Bucket grid for point location in a triangle mesh.
#[derive(Debug, Clone)]
pub struct Locator {
    lo: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let n = (mesh.element_count() as f64).sqrt().ceil().max(1.0);
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / n).max(1e-12);
        let nx = ((hi[0] - lo[0]) / cell).ceil() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).ceil() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for e in 0..mesh.element_count() {
            let v = mesh.vertices(e);
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in v {
                for k in 0..2 {
                    a[k] = a[k].min(p[k]);
                    b[k] = b[k].max(p[k]);
                }
            }
            let i0 = (((a[0] - lo[0]) / cell).floor().max(0.0) as usize).min(nx - 1);
            let i1 = (((b[0] - lo[0]) / cell).floor().max(0.0) as usize).min(nx - 1);
            let j0 = (((a[1] - lo[1]) / cell).floor().max(0.0) as usize).min(ny - 1);
            let j1 = (((b[1] - lo[1]) / cell).floor().max(0.0) as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(e);
                }
            }
        }
        Self {
            lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Element containing `p` and its barycentric coordinates.
    pub fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let fi = (p[0] - self.lo[0]) / self.cell;
        let fj = (p[1] - self.lo[1]) / self.cell;
        if fi < -1e-9 || fj < -1e-9 {
            return None;
        }
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = (fj.max(0.0) as usize).min(self.ny - 1);
        if fi > self.nx as f64 + 1e-9 || fj > self.ny as f64 + 1e-9 {
            return None;
        }
        for &e in &self.buckets[j * self.nx + i] {
            let b = barycentric(mesh, e, p);
            if b.iter().all(|&l| l >= -BARY_TOL) {
                return Some((e, b));
            }
        }
        None
    }
}

fn barycentric(mesh: &Mesh, e: usize, p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = mesh.vertices(e);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// One quadrature point: weight, element/barycentrics on its own mesh and,
/// if found, on the other mesh.
#[derive(Debug, Clone, Copy)]
struct QPoint {
    weight: f64,
    own: (usize, [f64; 3]),
    other: Option<(usize, [f64; 3])>,
}

/// Precomputed quadrature for comparing fields on two meshes.
#[derive(Debug, Clone)]
pub struct UnionQuadrature {
    a_tri: Vec<[usize; 3]>,
    b_tri: Vec<[usize; 3]>,
    /// Points over Ω_a, located in Ω_b where possible.
    on_a: Vec<QPoint>,
    /// Points over Ω_b that fall outside Ω_a.
    b_only: Vec<QPoint>,
}

fn element_points(mesh: &Mesh, e: usize, level: usize) -> Vec<(f64, [f64; 3], [f64; 2])> {
    let v = mesh.vertices(e);
    let subs = subdivide(level);
    let sub_w = mesh.areas[e] / subs.len() as f64;
    let mut out = Vec::with_capacity(subs.len() * TRI3_INTERIOR.len());
    for s in &subs {
        for (lam, w) in TRI3_INTERIOR.iter() {
            let mut b = [0.0; 3];
            for k in 0..3 {
                b[k] = lam[0] * s[0][k] + lam[1] * s[1][k] + lam[2] * s[2][k];
            }
            let x = [
                b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
                b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
            ];
            out.push((w * sub_w, b, x));
        }
    }
    out
}

impl UnionQuadrature {
    /// `coarse` and `fine` are subdivision levels for interior and cut elements.
    pub fn new(a: &Mesh, b: &Mesh, coarse: usize, fine: usize) -> Self {
        let loc_a = Locator::new(a);
        let loc_b = Locator::new(b);
        let inside = |m: &Mesh, loc: &Locator, e: usize, other: &Mesh| {
            let v = m.vertices(e);
            let c = m.centroid(e);
            v.iter().chain(std::iter::once(&c)).all(|&p| loc.locate(other, p).is_some())
        };
        let mut on_a = Vec::new();
        for e in 0..a.element_count() {
            let level = if inside(a, &loc_b, e, b) { coarse } else { fine };
            for (w, bary, x) in element_points(a, e, level) {
                on_a.push(QPoint {
                    weight: w,
                    own: (e, bary),
                    other: loc_b.locate(b, x),
                });
            }
        }
        let mut b_only = Vec::new();
        for e in 0..b.element_count() {
            if inside(b, &loc_a, e, a) {
                continue;
            }
            for (w, bary, x) in element_points(b, e, fine) {
                if loc_a.locate(a, x).is_none() {
                    b_only.push(QPoint {
                        weight: w,
                        own: (e, bary),
                        other: None,
                    });
                }
            }
        }
        Self {
            a_tri: a.triangles.clone(),
            b_tri: b.triangles.clone(),
            on_a,
            b_only,
        }
    }

    fn value(tri: &[[usize; 3]], u: &[f64], (e, l): (usize, [f64; 3])) -> f64 {
        let t = tri[e];
        l[0] * u[t[0]] + l[1] * u[t[1]] + l[2] * u[t[2]]
    }

    /// `‖u − ũ‖_{L²(Ω_a ∪ Ω_b)}` with both nodal fields extended by zero.
    pub fn distance(&self, ua: &[f64], ub: &[f64]) -> f64 {
        let mut s = 0.0;
        for q in &self.on_a {
            let va = Self::value(&self.a_tri, ua, q.own);
            let vb = q.other.map_or(0.0, |o| Self::value(&self.b_tri, ub, o));
            s += q.weight * (va - vb) * (va - vb);
        }
        for q in &self.b_only {
            let vb = Self::value(&self.b_tri, ub, q.own);
            s += q.weight * vb * vb;
        }
        s.max(0.0).sqrt()
    }

    /// `‖F‖_{L²(Ω_a ∪ Ω_b)}` for `F = u` on Ω_a and `ũ` on Ω_b ∖ Ω_a.
    pub fn merged_norm(&self, ua: &[f64], ub: &[f64]) -> f64 {
        let mut s = 0.0;
        for q in &self.on_a {
            let va = Self::value(&self.a_tri, ua, q.own);
            s += q.weight * va * va;
        }
        for q in &self.b_only {
            let vb = Self::value(&self.b_tri, ub, q.own);
            s += q.weight * vb * vb;
        }
        s.max(0.0).sqrt()
    }

    /// Measure of `Ω_b ∖ Ω_a` as seen by the quadrature.
    pub fn b_only_area(&self) -> f64 {
        self.b_only.iter().map(|q| q.weight).sum()
    }

    /// Measure of `Ω_a ∖ Ω_b` as seen by the quadrature.
    pub fn a_only_area(&self) -> f64 {
        self.on_a.iter().filter(|q| q.other.is_none()).map(|q| q.weight).sum()
    }
}
