//! Bi-Lipschitz deformation maps of a reference domain.
//!
//! Graph maps move the strip between the surface `g₃ = min{g₁,g₂} − δ|g₁−g₂|`
//! and the top of the cylinder affinely in the vertical coordinate, sending the
//! subgraph of `g₁` onto the subgraph of `g₂` and fixing everything below `g₃`.
//! Normal maps do the same in the coordinates `(θ, s)`, `x = c + (r₀ + s)e_r(θ)`,
//! of a tubular neighbourhood of a circle.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use super::domain::{check_band, DomainKind, ReferenceDomain};
use super::graph::BoundaryGraph;
use crate::error::{Error, Result};
use crate::linalg::norm2x2;

/// Points within this distance above `g₃` are treated as fixed.
pub const SEAM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Identity,
    GraphMap,
    NormalMap,
    Affine,
}

/// Parameters of a graph map over `W × (a, b)`.
#[derive(Debug, Clone)]
pub struct GraphMapParams {
    pub g1: BoundaryGraph,
    pub g2: BoundaryGraph,
    pub floor: f64,
    pub ceiling: f64,
    pub rho: f64,
    pub delta: f64,
}

/// Parameters of a normal map around a circle; the reference graph is `s ≡ 0`.
#[derive(Debug, Clone)]
pub struct NormalMapParams {
    pub center: [f64; 2],
    pub radius: f64,
    pub tube: f64,
    pub rho: f64,
    pub delta: f64,
    pub g: BoundaryGraph,
}

#[derive(Debug, Clone)]
enum Inner {
    Identity,
    Graph(GraphMapParams),
    Normal(NormalMapParams),
    Affine { m: Matrix2<f64>, c: Vector2<f64> },
}

/// Sampled Φ_τ-class certificate of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCertificate {
    /// `max(1, sup‖∇φ‖, (inf|det ∇φ|)⁻¹)` over the sample.
    pub tau: f64,
    pub min_abs_det: f64,
    pub max_norm: f64,
    pub samples: usize,
    /// No two sampled points share an image.
    pub injective: bool,
}

#[derive(Debug, Clone)]
pub struct DeformationMap {
    inner: Inner,
    certificate: MapCertificate,
}

/// Result of the one-dimensional strip formula at a single point.
#[derive(Debug, Clone, Copy)]
struct StripEval {
    value: f64,
    d_tangent: f64,
    d_normal: f64,
}

/// `g₃ = min{g₁,g₂} − δ|g₁−g₂|`.
pub fn fixed_surface(g1: f64, g2: f64, delta: f64) -> f64 {
    g1.min(g2) - delta * (g1 - g2).abs()
}

fn strip(g1: f64, g2: f64, dg1: f64, dg2: f64, delta: f64, y: f64) -> StripEval {
    let g3 = fixed_surface(g1, g2, delta);
    if y <= g3 + SEAM_TOLERANCE {
        return StripEval {
            value: y,
            d_tangent: 0.0,
            d_normal: 1.0,
        };
    }
    let kappa = if g2 <= g1 {
        delta / (delta + 1.0)
    } else {
        (delta + 1.0) / delta
    };
    StripEval {
        value: g2 + kappa * (y - g1),
        d_tangent: dg2 - kappa * dg1,
        d_normal: kappa,
    }
}

fn polar(center: [f64; 2], x: [f64; 2]) -> (f64, f64) {
    let dx = x[0] - center[0];
    let dy = x[1] - center[1];
    (dx.hypot(dy), dy.atan2(dx).rem_euclid(2.0 * PI))
}

impl DeformationMap {
    pub fn identity() -> Self {
        Self {
            inner: Inner::Identity,
            certificate: MapCertificate {
                tau: 1.0,
                min_abs_det: 1.0,
                max_norm: 1.0,
                samples: 0,
                injective: true,
            },
        }
    }

    /// `x ↦ m x + c`.
    pub fn affine(m: Matrix2<f64>, c: Vector2<f64>) -> Result<Self> {
        let det = m.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "affine map with det = {det:e} is not invertible"
            )));
        }
        let max_norm = norm2x2(&m);
        Ok(Self {
            inner: Inner::Affine { m, c },
            certificate: MapCertificate {
                tau: max_norm.max(1.0 / det.abs()).max(1.0),
                min_abs_det: det.abs(),
                max_norm,
                samples: 0,
                injective: true,
            },
        })
    }

    pub fn kind(&self) -> MapKind {
        match self.inner {
            Inner::Identity => MapKind::Identity,
            Inner::Graph(_) => MapKind::GraphMap,
            Inner::Normal(_) => MapKind::NormalMap,
            Inner::Affine { .. } => MapKind::Affine,
        }
    }

    pub fn graph_params(&self) -> Option<&GraphMapParams> {
        match &self.inner {
            Inner::Graph(p) => Some(p),
            _ => None,
        }
    }

    pub fn normal_params(&self) -> Option<&NormalMapParams> {
        match &self.inner {
            Inner::Normal(p) => Some(p),
            _ => None,
        }
    }

    pub fn certificate(&self) -> MapCertificate {
        self.certificate
    }

    pub fn tau(&self) -> f64 {
        self.certificate.tau
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        match &self.inner {
            Inner::Identity => x,
            Inner::Affine { m, c } => {
                let y = m * Vector2::new(x[0], x[1]) + c;
                [y[0], y[1]]
            }
            Inner::Graph(p) => {
                let s = strip(p.g1.eval(x[0]), p.g2.eval(x[0]), 0.0, 0.0, p.delta, x[1]);
                [x[0], s.value]
            }
            Inner::Normal(p) => {
                let (r, theta) = polar(p.center, x);
                let s = strip(0.0, p.g.eval(theta), 0.0, 0.0, p.delta, r - p.radius);
                let rr = p.radius + s.value;
                if rr == r {
                    return x;
                }
                [p.center[0] + rr * theta.cos(), p.center[1] + rr * theta.sin()]
            }
        }
    }

    /// Analytic Jacobian; on the seam `g₃` the fixed side is used.
    pub fn jacobian(&self, x: [f64; 2]) -> Matrix2<f64> {
        match &self.inner {
            Inner::Identity => Matrix2::identity(),
            Inner::Affine { m, .. } => *m,
            Inner::Graph(p) => {
                let s = strip(
                    p.g1.eval(x[0]),
                    p.g2.eval(x[0]),
                    p.g1.derivative(x[0]),
                    p.g2.derivative(x[0]),
                    p.delta,
                    x[1],
                );
                Matrix2::new(1.0, 0.0, s.d_tangent, s.d_normal)
            }
            Inner::Normal(p) => {
                let (r, theta) = polar(p.center, x);
                let s = strip(
                    0.0,
                    p.g.eval(theta),
                    0.0,
                    p.g.derivative(theta),
                    p.delta,
                    r - p.radius,
                );
                if s.d_tangent == 0.0 && s.d_normal == 1.0 {
                    return Matrix2::identity();
                }
                let er = Vector2::new(theta.cos(), theta.sin());
                let et = Vector2::new(-theta.sin(), theta.cos());
                let rr = p.radius + s.value;
                er * er.transpose() * s.d_normal
                    + er * et.transpose() * (s.d_tangent / r)
                    + et * et.transpose() * (rr / r)
            }
        }
    }

    /// Solves `φ(x) = y` by damped Newton iteration started at `y`.
    pub fn inverse(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        match &self.inner {
            Inner::Identity => return Ok(y),
            Inner::Affine { m, c } => {
                let x = m
                    .try_inverse()
                    .ok_or_else(|| Error::Inconsistent("affine map lost invertibility".into()))?
                    * (Vector2::new(y[0], y[1]) - c);
                return Ok([x[0], x[1]]);
            }
            _ => {}
        }
        let target = Vector2::new(y[0], y[1]);
        let scale = 1.0 + target.norm();
        let mut x = target;
        let residual = |x: &Vector2<f64>| {
            let f = self.apply([x[0], x[1]]);
            Vector2::new(f[0], f[1]) - target
        };
        let mut r = residual(&x);
        for _ in 0..100 {
            if r.norm() <= 1e-14 * scale {
                return Ok([x[0], x[1]]);
            }
            let j = self.jacobian([x[0], x[1]]);
            let step = j
                .try_inverse()
                .ok_or_else(|| Error::Inconsistent("singular Jacobian during inversion".into()))?
                * r;
            let mut t = 1.0;
            loop {
                let cand = x - step * t;
                let rc = residual(&cand);
                if rc.norm() < r.norm() || t < 1e-6 {
                    x = cand;
                    r = rc;
                    break;
                }
                t *= 0.5;
            }
        }
        if r.norm() <= 1e-10 * scale {
            Ok([x[0], x[1]])
        } else {
            Err(Error::Inconsistent(format!(
                "inverse did not converge at ({}, {}): residual {:e}",
                y[0],
                y[1],
                r.norm()
            )))
        }
    }

    /// Samples the map on an `n × n` grid of the domain and recomputes the certificate.
    pub fn certify(&self, domain: &ReferenceDomain, n: usize) -> MapCertificate {
        certify_on(self, &domain_samples(domain, n))
    }
}

/// Builds the graph map sending the subgraph of `g1` onto the subgraph of `g2`
/// inside `W × (a, b)`, with `δ = ρ/(2(b − a))`.
pub fn build_graph_map(
    g1: &BoundaryGraph,
    g2: &BoundaryGraph,
    floor: f64,
    ceiling: f64,
    rho: f64,
) -> Result<DeformationMap> {
    if !(rho > 0.0 && rho < ceiling - floor) {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} must lie in (0, b - a = {})",
            ceiling - floor
        )));
    }
    check_band(g1, floor + rho, ceiling)?;
    check_band(g2, floor + rho, ceiling)?;
    let params = GraphMapParams {
        g1: g1.clone(),
        g2: g2.clone(),
        floor,
        ceiling,
        rho,
        delta: rho / (2.0 * (ceiling - floor)),
    };
    let (w0, w1) = g1.interval();
    let top = g1.sampled_max().max(g2.sampled_max());
    let samples = grid_samples(64, |i, j| {
        let x = w0 + (w1 - w0) * (i as f64 + 0.5) / 64.0;
        [x, floor + (top - floor) * (j as f64 + 0.5) / 64.0]
    });
    let mut map = DeformationMap {
        inner: Inner::Graph(params),
        certificate: DeformationMap::identity().certificate,
    };
    map.certificate = certify_on(&map, &samples);
    Ok(map)
}

/// Builds the normal map of a disk for the boundary displacement `g(θ)`,
/// acting in `(θ, s)` with band `(−t, t)` and `δ = ρ/(4t)`.
pub fn build_normal_map(disk: &ReferenceDomain, g: &BoundaryGraph, rho: f64) -> Result<DeformationMap> {
    let DomainKind::Disk {
        center,
        radius,
        tube,
    } = disk.kind
    else {
        return Err(Error::InvalidParameter("normal maps need a disk".into()));
    };
    if !(rho > 0.0 && rho < 2.0 * tube) {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} must lie in (0, 2t = {})",
            2.0 * tube
        )));
    }
    check_band(g, -tube + rho, tube)?;
    let params = NormalMapParams {
        center,
        radius,
        tube,
        rho,
        delta: rho / (4.0 * tube),
        g: g.clone(),
    };
    let mut map = DeformationMap {
        inner: Inner::Normal(params),
        certificate: DeformationMap::identity().certificate,
    };
    map.certificate = certify_on(&map, &domain_samples(disk, 64));
    Ok(map)
}

fn grid_samples(n: usize, f: impl Fn(usize, usize) -> [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(f(i, j));
        }
    }
    out
}

/// Interior sample points on an `n × n` parameter grid of the domain.
pub fn domain_samples(domain: &ReferenceDomain, n: usize) -> Vec<[f64; 2]> {
    match &domain.kind {
        DomainKind::GraphCylinder {
            w0, w1, floor, graph, ..
        } => grid_samples(n, |i, j| {
            let x = w0 + (w1 - w0) * (i as f64 + 0.5) / n as f64;
            let top = graph.eval(x);
            [x, floor + (top - floor) * (j as f64 + 0.5) / n as f64]
        }),
        DomainKind::Disk { center, radius, .. } => grid_samples(n, |i, j| {
            let r = radius * (i as f64 + 0.5) / n as f64;
            let t = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            [center[0] + r * t.cos(), center[1] + r * t.sin()]
        }),
    }
}

fn certify_on(map: &DeformationMap, samples: &[[f64; 2]]) -> MapCertificate {
    let mut min_det = f64::INFINITY;
    let mut max_norm: f64 = 0.0;
    for &x in samples {
        let j = map.jacobian(x);
        min_det = min_det.min(j.determinant().abs());
        max_norm = max_norm.max(norm2x2(&j));
    }
    let mut images: Vec<[f64; 2]> = samples.iter().map(|&x| map.apply(x)).collect();
    images.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut injective = true;
    'outer: for i in 0..images.len() {
        for j in i + 1..images.len() {
            if images[j][0] - images[i][0] > 1e-12 {
                break;
            }
            if (images[j][1] - images[i][1]).abs() <= 1e-12 {
                injective = false;
                break 'outer;
            }
        }
    }
    MapCertificate {
        tau: max_norm.max(1.0 / min_det).max(1.0),
        min_abs_det: min_det,
        max_norm,
        samples: samples.len(),
        injective,
    }
}
