//! Triangular meshes of reference domains.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::geometry::domain::{BoundaryLocation, BoundarySide, DomainKind, ReferenceDomain};
use crate::error::{Error, Result};
use crate::geometry::DeformationMap;

/// Minimum interior angle accepted by the generators, in degrees.
pub const MIN_ANGLE_DEG: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Dirichlet,
    Neumann,
}

impl EdgeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeTag::Dirichlet => "dirichlet",
            EdgeTag::Neumann => "neumann",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints in counter-clockwise boundary order.
    pub nodes: [usize; 2],
    pub tag: EdgeTag,
    pub location: BoundaryLocation,
}

/// Conforming P1 triangulation with per-element areas and barycentric gradients.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub areas: Vec<f64>,
    /// `gradients[e][k]` is the gradient of the k-th barycentric coordinate on element `e`.
    pub gradients: Vec<[[f64; 2]; 3]>,
}

fn element_geometry(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let [a, b, c] = p;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let area = 0.5 * det;
    // ∇λ_k = rot90(opposite edge) / (2·area)
    let grad = |q: [f64; 2], r: [f64; 2]| [(q[1] - r[1]) / det, (r[0] - q[0]) / det];
    (area, [grad(b, c), grad(c, a), grad(a, b)])
}

impl Mesh {
    pub fn new(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut gradients = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter().enumerate() {
            let (area, g) = element_geometry([nodes[t[0]], nodes[t[1]], nodes[t[2]]]);
            if !(area > 1e-14) {
                return Err(Error::DegenerateElement { element: e, area });
            }
            areas.push(area);
            gradients.push(g);
        }
        Ok(Self {
            nodes,
            triangles,
            boundary,
            areas,
            gradients,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let v = self.vertices(e);
        [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Lumped mass `m_i = Σ_{e ∋ i} |e| / 3`.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nodes.len()];
        for (t, a) in self.triangles.iter().zip(&self.areas) {
            for &i in t {
                m[i] += a / 3.0;
            }
        }
        m
    }

    /// Smallest interior angle over all elements, in degrees, with the element index.
    pub fn min_angle_deg(&self) -> (f64, usize) {
        let mut worst = (180.0, 0);
        for e in 0..self.triangles.len() {
            let v = self.vertices(e);
            for k in 0..3 {
                let (p, q, r) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
                let u = [q[0] - p[0], q[1] - p[1]];
                let w = [r[0] - p[0], r[1] - p[1]];
                let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
                let ang = cos.clamp(-1.0, 1.0).acos().to_degrees();
                if ang < worst.0 {
                    worst = (ang, e);
                }
            }
        }
        worst
    }

    /// Longest edge length.
    pub fn max_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for e in 0..self.triangles.len() {
            let v = self.vertices(e);
            for k in 0..3 {
                let (p, q) = (v[k], v[(k + 1) % 3]);
                h = h.max((q[0] - p[0]).hypot(q[1] - p[1]));
            }
        }
        h
    }

    /// Same connectivity with nodes moved by `φ`.
    pub fn mapped(&self, phi: &DeformationMap) -> Result<Mesh> {
        let nodes = self.nodes.iter().map(|&x| phi.apply(x)).collect();
        Mesh::new(nodes, self.triangles.clone(), self.boundary.clone())
    }

    fn check_quality(&self) -> Result<()> {
        let (ang, e) = self.min_angle_deg();
        if ang < MIN_ANGLE_DEG {
            return Err(Error::MeshQuality {
                element: e,
                min_angle_deg: ang,
            });
        }
        Ok(())
    }

    /// Text export: counts line, then `x y` node lines, `i j k` triangle lines
    /// and `i j tag` boundary lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.nodes.len(), self.triangles.len(), self.boundary.len()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        for b in &self.boundary {
            writeln!(s, "{} {} {}", b.nodes[0], b.nodes[1], b.tag.as_str()).unwrap();
        }
        s
    }
}

/// Meshes a reference domain with target edge length `h`.
pub fn generate_mesh(domain: &ReferenceDomain, h: f64) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh size h = {h} must be positive")));
    }
    match &domain.kind {
        DomainKind::GraphCylinder {
            w0, w1, floor, graph, ..
        } => {
            let nx = ((w1 - w0) / h).ceil() as usize;
            let ny = ((graph.sampled_max() - floor) / h).ceil() as usize;
            generate_graph_mesh(domain, nx.max(1), ny.max(1))
        }
        DomainKind::Disk { radius, .. } => generate_disk_mesh(domain, (radius / h).ceil().max(1.0) as usize),
    }
}

fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
}

/// Mapped structured grid of a graph cylinder: `nx × ny` cells, each split
/// along its shorter diagonal.
pub fn generate_graph_mesh(domain: &ReferenceDomain, nx: usize, ny: usize) -> Result<Mesh> {
    let DomainKind::GraphCylinder {
        w0, w1, floor, graph, ..
    } = &domain.kind
    else {
        return Err(Error::InvalidParameter("graph mesh needs a graph cylinder".into()));
    };
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = w0 + (w1 - w0) * i as f64 / nx as f64;
            let top = graph.eval(x);
            nodes.push([x, floor + (top - floor) * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // Shorter diagonal; ties keep the a–c split so flat grids stay uniform.
            if dist2(nodes[a], nodes[c]) <= dist2(nodes[b], nodes[d]) * (1.0 + 1e-9) {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut edges = Vec::new();
    let mid = |p: usize, q: usize, k: usize| 0.5 * (nodes[p][k] + nodes[q][k]);
    for i in 0..nx {
        let (p, q) = (idx(i, 0), idx(i + 1, 0));
        edges.push(([p, q], BoundarySide::Bottom, mid(p, q, 0)));
    }
    for j in 0..ny {
        let (p, q) = (idx(nx, j), idx(nx, j + 1));
        edges.push(([p, q], BoundarySide::Right, mid(p, q, 1)));
    }
    for i in (0..nx).rev() {
        let (p, q) = (idx(i + 1, ny), idx(i, ny));
        edges.push(([p, q], BoundarySide::Top, mid(p, q, 0)));
    }
    for j in (0..ny).rev() {
        let (p, q) = (idx(0, j + 1), idx(0, j));
        edges.push(([p, q], BoundarySide::Left, mid(p, q, 1)));
    }
    finish(domain, nodes, triangles, edges)
}

/// Concentric-ring mesh of a disk: ring `k` (radius `k·r₀/rings`) carries `6k` nodes.
pub fn generate_disk_mesh(domain: &ReferenceDomain, rings: usize) -> Result<Mesh> {
    let DomainKind::Disk { center, radius, .. } = domain.kind else {
        return Err(Error::InvalidParameter("disk mesh needs a disk".into()));
    };
    let mut nodes = vec![center];
    let ring_start = |k: usize| if k == 0 { 0 } else { 1 + 3 * k * (k - 1) };
    let ring_len = |k: usize| if k == 0 { 1 } else { 6 * k };
    for k in 1..=rings {
        let r = radius * k as f64 / rings as f64;
        for j in 0..6 * k {
            let t = 2.0 * PI * j as f64 / (6 * k) as f64;
            nodes.push([center[0] + r * t.cos(), center[1] + r * t.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for k in 1..=rings {
        let (si, ni) = (ring_start(k - 1), ring_len(k - 1));
        let (so, no) = (ring_start(k), ring_len(k));
        if k == 1 {
            for j in 0..no {
                triangles.push([si, so + j, so + (j + 1) % no]);
            }
            continue;
        }
        // Merge the two rings by angle.
        let (mut i, mut j) = (0, 0);
        while i < ni || j < no {
            let next_in = (i + 1) as f64 / ni as f64;
            let next_out = (j + 1) as f64 / no as f64;
            if j < no && (i >= ni || next_out <= next_in) {
                triangles.push([si + i % ni, so + j, so + (j + 1) % no]);
                j += 1;
            } else {
                triangles.push([si + i % ni, so + j % no, si + (i + 1) % ni]);
                i += 1;
            }
        }
    }
    let (so, no) = (ring_start(rings), ring_len(rings));
    let edges = (0..no)
        .map(|j| {
            let (p, q) = (so + j, so + (j + 1) % no);
            let m = [0.5 * (nodes[p][0] + nodes[q][0]), 0.5 * (nodes[p][1] + nodes[q][1])];
            let t = (m[1] - center[1]).atan2(m[0] - center[0]).rem_euclid(2.0 * PI);
            ([p, q], BoundarySide::Circle, t)
        })
        .collect();
    finish(domain, nodes, triangles, edges)
}

fn finish(
    domain: &ReferenceDomain,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<([usize; 2], BoundarySide, f64)>,
) -> Result<Mesh> {
    let spec = &domain.dirichlet;
    let mut counts = vec![0usize; spec.pieces.len()];
    let boundary = edges
        .into_iter()
        .map(|(nodes, side, param)| {
            let location = BoundaryLocation { side, param };
            let tag = match spec.piece_of(location) {
                Some(p) => {
                    counts[p] += 1;
                    EdgeTag::Dirichlet
                }
                None => EdgeTag::Neumann,
            };
            BoundaryEdge { nodes, tag, location }
        })
        .collect();
    for (piece, &c) in spec.pieces.iter().zip(&counts) {
        if c < 2 {
            return Err(Error::UnresolvedDirichlet {
                piece: piece.label(),
                edges: c,
            });
        }
    }
    let mesh = Mesh::new(nodes, triangles, boundary)?;
    mesh.check_quality()?;
    Ok(mesh)
}
