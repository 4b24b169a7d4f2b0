//! Reference domains and the Dirichlet part Γ of their boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::graph::BoundaryGraph;
use crate::error::{Error, Result};

/// Which part of the boundary an edge lies on, with its position parameter
/// (x along bottom/top, y along left/right, angle on a circle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySide {
    Bottom,
    Top,
    Left,
    Right,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLocation {
    pub side: BoundarySide,
    pub param: f64,
}

/// One open piece of Γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "piece", rename_all = "kebab-case")]
pub enum BoundaryPiece {
    /// The whole boundary.
    All,
    /// A side of a graph cylinder, optionally restricted to a parameter range.
    Side {
        side: BoundarySide,
        #[serde(default)]
        range: Option<[f64; 2]>,
    },
    /// Counter-clockwise arc of a disk boundary from `from` to `to` (radians).
    Arc { from: f64, to: f64 },
}

impl BoundaryPiece {
    pub fn side(side: BoundarySide) -> Self {
        BoundaryPiece::Side { side, range: None }
    }

    pub fn contains(&self, loc: BoundaryLocation) -> bool {
        match *self {
            BoundaryPiece::All => true,
            BoundaryPiece::Side { side, range } => {
                side == loc.side
                    && range.is_none_or(|[lo, hi]| loc.param > lo && loc.param < hi)
            }
            BoundaryPiece::Arc { from, to } => {
                if loc.side != BoundarySide::Circle {
                    return false;
                }
                let span = (to - from).rem_euclid(2.0 * PI);
                let span = if span == 0.0 && to != from { 2.0 * PI } else { span };
                let rel = (loc.param - from).rem_euclid(2.0 * PI);
                rel > 0.0 && rel < span
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            BoundaryPiece::All => "all".into(),
            BoundaryPiece::Side { side, range } => match range {
                Some([a, b]) => format!("{side:?}({a}, {b})").to_lowercase(),
                None => format!("{side:?}").to_lowercase(),
            },
            BoundaryPiece::Arc { from, to } => format!("arc({from}, {to})"),
        }
    }
}

/// Γ as a finite union of boundary pieces; empty means pure Neumann.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpec {
    pub pieces: Vec<BoundaryPiece>,
}

impl DirichletSpec {
    pub fn neumann() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn all() -> Self {
        Self {
            pieces: vec![BoundaryPiece::All],
        }
    }

    pub fn sides(sides: &[BoundarySide]) -> Self {
        Self {
            pieces: sides.iter().map(|&s| BoundaryPiece::side(s)).collect(),
        }
    }

    /// Index of the first piece containing the location.
    pub fn piece_of(&self, loc: BoundaryLocation) -> Option<usize> {
        self.pieces.iter().position(|p| p.contains(loc))
    }
}

/// Shape of a reference domain.
#[derive(Debug, Clone)]
pub enum DomainKind {
    /// `{(x, y) : w0 < x < w1, a < y < g(x)}` inside the cylinder `(w0, w1) × (a, b)`.
    GraphCylinder {
        w0: f64,
        w1: f64,
        floor: f64,
        ceiling: f64,
        rho: f64,
        graph: BoundaryGraph,
    },
    /// Disk with a tubular neighbourhood of half-width `tube` around its boundary.
    Disk {
        center: [f64; 2],
        radius: f64,
        tube: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ReferenceDomain {
    pub kind: DomainKind,
    pub dirichlet: DirichletSpec,
}

impl ReferenceDomain {
    pub fn graph_cylinder(
        (w0, w1): (f64, f64),
        floor: f64,
        ceiling: f64,
        rho: f64,
        graph: BoundaryGraph,
        dirichlet: DirichletSpec,
    ) -> Result<Self> {
        if !(w1 > w0) || !(ceiling > floor) {
            return Err(Error::InvalidParameter(format!(
                "empty cylinder ({w0}, {w1}) x ({floor}, {ceiling})"
            )));
        }
        if !(rho > 0.0 && rho < ceiling - floor) {
            return Err(Error::InvalidParameter(format!(
                "rho = {rho} must lie in (0, {})",
                ceiling - floor
            )));
        }
        check_band(&graph, floor + rho, ceiling)?;
        Ok(Self {
            kind: DomainKind::GraphCylinder {
                w0,
                w1,
                floor,
                ceiling,
                rho,
                graph,
            },
            dirichlet,
        })
    }

    /// The unit square `(0,1)²` viewed as the subgraph of `g ≡ 1` in `(0,1) × (0, 1.5)`, ρ = 0.5.
    pub fn unit_square(dirichlet: DirichletSpec) -> Self {
        Self::graph_cylinder(
            (0.0, 1.0),
            0.0,
            1.5,
            0.5,
            BoundaryGraph::constant(1.0, (0.0, 1.0)),
            dirichlet,
        )
        .expect("unit square is a valid graph cylinder")
    }

    pub fn disk(center: [f64; 2], radius: f64, tube: f64, dirichlet: DirichletSpec) -> Result<Self> {
        if !(radius > 0.0) || !(tube > 0.0 && tube <= radius) {
            return Err(Error::InvalidParameter(format!(
                "disk needs radius > 0 and 0 < tube <= radius (radius {radius}, tube {tube})"
            )));
        }
        Ok(Self {
            kind: DomainKind::Disk {
                center,
                radius,
                tube,
            },
            dirichlet,
        })
    }

    /// Exact area of the domain (graph integral by adaptive quadrature).
    pub fn area(&self) -> f64 {
        match &self.kind {
            DomainKind::GraphCylinder {
                w0,
                w1,
                floor,
                graph,
                ..
            } => crate::quadrature::adaptive(|x| graph.eval(x) - floor, *w0, *w1, 1e-13),
            DomainKind::Disk { radius, .. } => PI * radius * radius,
        }
    }

    /// Sampled Lipschitz constant of the boundary graph (0 for the disk).
    pub fn lipschitz_estimate(&self) -> f64 {
        match &self.kind {
            DomainKind::GraphCylinder { graph, .. } => graph.lipschitz_estimate(),
            DomainKind::Disk { .. } => 0.0,
        }
    }
}

pub(crate) fn check_band(graph: &BoundaryGraph, lo: f64, hi: f64) -> Result<()> {
    match graph.band_violation(lo, hi) {
        Some((x, value)) => Err(Error::BandViolation {
            graph: graph.name().to_string(),
            x,
            value,
            lo,
            hi,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arcs_wrap_around_zero() {
        let arc = BoundaryPiece::Arc {
            from: 1.5 * PI,
            to: 0.5 * PI,
        };
        let at = |t: f64| BoundaryLocation {
            side: BoundarySide::Circle,
            param: t,
        };
        assert!(arc.contains(at(0.1)));
        assert!(arc.contains(at(1.9 * PI)));
        assert!(!arc.contains(at(PI)));
    }

    #[test]
    fn side_ranges_are_open() {
        let p = BoundaryPiece::Side {
            side: BoundarySide::Bottom,
            range: Some([0.2, 0.6]),
        };
        let at = |x: f64| BoundaryLocation {
            side: BoundarySide::Bottom,
            param: x,
        };
        assert!(p.contains(at(0.3)));
        assert!(!p.contains(at(0.6)));
        assert!(!p.contains(BoundaryLocation {
            side: BoundarySide::Top,
            param: 0.3
        }));
    }

    #[test]
    fn band_is_enforced() {
        let g = BoundaryGraph::constant(0.4, (0.0, 1.0));
        let d = ReferenceDomain::graph_cylinder((0.0, 1.0), 0.0, 1.5, 0.5, g, DirichletSpec::all());
        assert!(matches!(d, Err(Error::BandViolation { .. })));
    }

    #[test]
    fn unit_square_area() {
        let d = ReferenceDomain::unit_square(DirichletSpec::all());
        assert!((d.area() - 1.0).abs() < 1e-14);
    }
}
