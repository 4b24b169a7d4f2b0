//! Scalar measures of how far apart two deformations are: the symmetric
//! difference of the image domains, the measure of the displaced set, and
//! `δ_p(φ, φ̃) = ‖∇φ̃ − ∇φ‖_{L^p(Ω)} + ‖A∘φ̃ − A∘φ‖_{L^p(Ω)}`.
//!
//! Integrals are iterated one-dimensional quadratures in the natural
//! coordinates of the domain (`(x, y)` for graph cylinders, `(θ, r)` for
//! disks). The inner rule is split at the fixed surfaces `g₃` of both maps so
//! that every piece sees a smooth integrand.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::domain::{DomainKind, ReferenceDomain};
use super::map::{fixed_surface, DeformationMap, MapKind};
use crate::error::{Error, Result};
use crate::linalg::norm2x2;
use crate::operator::CoefficientField;
use crate::quadrature::{adaptive, adaptive_with_breaks, GaussRule};

/// Vicinity measures of a pair of maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VicinityReport {
    pub sym_diff: f64,
    /// `(p, δ_p)` pairs; `p = ∞` is stored as `f64::INFINITY`.
    pub delta_p: Vec<(f64, f64)>,
    pub displaced_measure: f64,
}

pub fn vicinity_report(
    domain: &ReferenceDomain,
    phi: &DeformationMap,
    phi_t: &DeformationMap,
    a: &CoefficientField,
    ps: &[f64],
) -> Result<VicinityReport> {
    let delta_p = ps
        .iter()
        .map(|&p| delta_p(domain, phi, phi_t, a, p).map(|v| (p, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VicinityReport {
        sym_diff: symmetric_difference(domain, phi, phi_t)?,
        delta_p,
        displaced_measure: displaced_measure(domain, phi, phi_t)?,
    })
}

/// Per-abscissa description of a map in natural coordinates:
/// image boundary value and fixed-surface height.
#[derive(Clone, Copy)]
struct Profile {
    image: f64,
    fixed_below: f64,
}

fn graph_profile(domain: &ReferenceDomain, map: &DeformationMap, x: f64) -> Result<Profile> {
    let DomainKind::GraphCylinder { graph, .. } = &domain.kind else {
        unreachable!()
    };
    match map.kind() {
        MapKind::Identity => {
            let g = graph.eval(x);
            Ok(Profile {
                image: g,
                fixed_below: g,
            })
        }
        MapKind::GraphMap => {
            let p = map.graph_params().expect("graph map");
            let (g1, g2) = (p.g1.eval(x), p.g2.eval(x));
            Ok(Profile {
                image: g2,
                fixed_below: fixed_surface(g1, g2, p.delta),
            })
        }
        k => Err(Error::MixedKinds(format!("{k:?} on a graph cylinder"))),
    }
}

fn normal_profile(map: &DeformationMap, theta: f64) -> Result<Profile> {
    match map.kind() {
        MapKind::Identity => Ok(Profile {
            image: 0.0,
            fixed_below: 0.0,
        }),
        MapKind::NormalMap => {
            let p = map.normal_params().expect("normal map");
            let g = p.g.eval(theta);
            Ok(Profile {
                image: g,
                fixed_below: fixed_surface(0.0, g, p.delta),
            })
        }
        k => Err(Error::MixedKinds(format!("{k:?} on a disk"))),
    }
}

fn check_pair(domain: &ReferenceDomain, phi: &DeformationMap, phi_t: &DeformationMap) -> Result<()> {
    let probe = match &domain.kind {
        DomainKind::GraphCylinder { w0, .. } => {
            graph_profile(domain, phi, *w0).and(graph_profile(domain, phi_t, *w0))
        }
        DomainKind::Disk { .. } => normal_profile(phi, 0.0).and(normal_profile(phi_t, 0.0)),
    };
    probe.map(|_| ())
}

/// `|φ(Ω) △ φ̃(Ω)|`.
pub fn symmetric_difference(
    domain: &ReferenceDomain,
    phi: &DeformationMap,
    phi_t: &DeformationMap,
) -> Result<f64> {
    check_pair(domain, phi, phi_t)?;
    match &domain.kind {
        DomainKind::GraphCylinder { w0, w1, .. } => Ok(adaptive(
            |x| {
                let a = graph_profile(domain, phi, x).unwrap().image;
                let b = graph_profile(domain, phi_t, x).unwrap().image;
                (a - b).abs()
            },
            *w0,
            *w1,
            1e-14,
        )),
        DomainKind::Disk { radius, .. } => {
            let r0 = *radius;
            Ok(adaptive(
                |t| {
                    let g = normal_profile(phi, t).unwrap().image;
                    let gt = normal_profile(phi_t, t).unwrap().image;
                    // Length element r₀ dθ times ∫ (1 + sκ) ds between the two graphs.
                    r0 * ((g - gt) + (g * g - gt * gt) / (2.0 * r0)).abs()
                },
                0.0,
                2.0 * PI,
                1e-14,
            ))
        }
    }
}

/// `|{x ∈ Ω : φ(x) ≠ φ̃(x)}|` for pairs of graph or normal maps.
pub fn displaced_measure(
    domain: &ReferenceDomain,
    phi: &DeformationMap,
    phi_t: &DeformationMap,
) -> Result<f64> {
    check_pair(domain, phi, phi_t)?;
    match &domain.kind {
        DomainKind::GraphCylinder { w0, w1, graph, .. } => Ok(adaptive(
            |x| {
                let a = graph_profile(domain, phi, x).unwrap();
                let b = graph_profile(domain, phi_t, x).unwrap();
                if (a.image - b.image).abs() <= 1e-15 {
                    0.0
                } else {
                    graph.eval(x) - a.fixed_below.min(b.fixed_below)
                }
            },
            *w0,
            *w1,
            1e-13,
        )),
        DomainKind::Disk { radius, .. } => {
            let r0 = *radius;
            Ok(adaptive(
                |t| {
                    let a = normal_profile(phi, t).unwrap();
                    let b = normal_profile(phi_t, t).unwrap();
                    if (a.image - b.image).abs() <= 1e-15 {
                        0.0
                    } else {
                        let r = r0 + a.fixed_below.min(b.fixed_below);
                        0.5 * (r0 * r0 - r * r)
                    }
                },
                0.0,
                2.0 * PI,
                1e-13,
            ))
        }
    }
}

/// `δ_p(φ, φ̃)`; matrix absolute values are spectral norms. `p = ∞` gives the
/// maximum over quadrature nodes.
pub fn delta_p(
    domain: &ReferenceDomain,
    phi: &DeformationMap,
    phi_t: &DeformationMap,
    a: &CoefficientField,
    p: f64,
) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("delta_p needs p >= 2, got {p}")));
    }
    let structured = check_pair(domain, phi, phi_t).is_ok();
    let rule = GaussRule::new(16);
    let infinite = p.is_infinite();
    let sup = std::cell::Cell::new((0.0f64, 0.0f64));
    // Pointwise pair (|∇φ̃ − ∇φ|, |A∘φ̃ − A∘φ|).
    let pointwise = |x: [f64; 2]| {
        let dj = norm2x2(&(phi_t.jacobian(x) - phi.jacobian(x)));
        let da = norm2x2(&(a.eval(phi_t.apply(x)) - a.eval(phi.apply(x))));
        (dj, da)
    };
    let accumulate = |x: [f64; 2], w: f64, acc: &mut (f64, f64)| {
        let (dj, da) = pointwise(x);
        if infinite {
            let (s0, s1) = sup.get();
            sup.set((s0.max(dj), s1.max(da)));
        } else {
            acc.0 += w * dj.powf(p);
            acc.1 += w * da.powf(p);
        }
    };
    // Inner integral over a segment family [lo, hi] split at `breaks`.
    let inner = |lo: f64, hi: f64, breaks: &[f64], point: &dyn Fn(f64) -> ([f64; 2], f64)| {
        let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
        pts.sort_by(f64::total_cmp);
        pts.insert(0, lo);
        pts.push(hi);
        let mut acc = (0.0, 0.0);
        for w in pts.windows(2) {
            for (s, ws) in rule.on(w[0], w[1]) {
                let (x, jac) = point(s);
                accumulate(x, ws * jac, &mut acc);
            }
        }
        acc
    };
    let (i_j, i_a) = match &domain.kind {
        DomainKind::GraphCylinder {
            w0, w1, floor, graph, ..
        } => {
            let column = |x: f64| {
                let g1 = graph.eval(x);
                let (lo, breaks) = if structured {
                    let a = graph_profile(domain, phi, x).unwrap().fixed_below;
                    let b = graph_profile(domain, phi_t, x).unwrap().fixed_below;
                    (a.min(b).max(*floor), vec![a, b])
                } else {
                    (*floor, vec![])
                };
                inner(lo, g1, &breaks, &|y| ([x, y], 1.0))
            };
            let bx = kink_breaks(*w0, *w1, 64);
            (
                adaptive_with_breaks(|x| column(x).0, *w0, *w1, &bx, 1e-12),
                adaptive_with_breaks(|x| column(x).1, *w0, *w1, &bx, 1e-12),
            )
        }
        DomainKind::Disk { center, radius, .. } => {
            let r0 = *radius;
            let ray = |t: f64| {
                let (lo, breaks) = if structured {
                    let a = normal_profile(phi, t).unwrap().fixed_below;
                    let b = normal_profile(phi_t, t).unwrap().fixed_below;
                    ((r0 + a.min(b)).max(0.0), vec![r0 + a, r0 + b])
                } else {
                    (0.0, vec![])
                };
                inner(lo, r0, &breaks, &|r| {
                    ([center[0] + r * t.cos(), center[1] + r * t.sin()], r)
                })
            };
            let bt = kink_breaks(0.0, 2.0 * PI, 96);
            (
                adaptive_with_breaks(|t| ray(t).0, 0.0, 2.0 * PI, &bt, 1e-12),
                adaptive_with_breaks(|t| ray(t).1, 0.0, 2.0 * PI, &bt, 1e-12),
            )
        }
    };
    if infinite {
        let (s0, s1) = sup.get();
        Ok(s0 + s1)
    } else {
        Ok(i_j.max(0.0).powf(1.0 / p) + i_a.max(0.0).powf(1.0 / p))
    }
}

/// Uniform outer breakpoints so the adaptive rule starts from a resolved grid.
fn kink_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    (1..n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}
