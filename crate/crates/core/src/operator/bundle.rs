//! Per-element transported coefficients `a, g, ã, g̃, w, S`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::coefficient::CoefficientField;
use crate::discretization::Mesh;
use crate::error::{Error, Result};
use crate::geometry::DeformationMap;
use crate::linalg::{sqrt_spd2, sym2_eigen, sym2_fn};

/// How the element Jacobian `∇φ` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianRule {
    /// Analytic Jacobian of `φ` at the element centroid; `A` at `φ(centroid)`.
    Centroid,
    /// Jacobian of the piecewise-linear interpolant of `φ` on the element,
    /// i.e. the affine map onto the image triangle; `A` at the image centroid.
    #[default]
    Interpolant,
}

/// Pulled-back coefficient `a_e = (∇φ)⁻¹A(φ)(∇φ)⁻ᵗ` and weight `g_e = |det ∇φ|`.
#[derive(Debug, Clone)]
pub struct PulledBack {
    pub a: Vec<Matrix2<f64>>,
    pub g: Vec<f64>,
}

fn element_jacobian(mesh: &Mesh, phi: &DeformationMap, e: usize, rule: JacobianRule) -> (Matrix2<f64>, [f64; 2]) {
    match rule {
        JacobianRule::Centroid => {
            let c = mesh.centroid(e);
            (phi.jacobian(c), phi.apply(c))
        }
        JacobianRule::Interpolant => {
            let [p0, p1, p2] = mesh.vertices(e);
            let [q0, q1, q2] = [phi.apply(p0), phi.apply(p1), phi.apply(p2)];
            let dp = Matrix2::new(p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1]);
            let dq = Matrix2::new(q1[0] - q0[0], q2[0] - q0[0], q1[1] - q0[1], q2[1] - q0[1]);
            let j = dq * dp.try_inverse().expect("mesh elements are non-degenerate");
            let c = [(q0[0] + q1[0] + q2[0]) / 3.0, (q0[1] + q1[1] + q2[1]) / 3.0];
            (j, c)
        }
    }
}

/// Transports `A` through `φ` element by element.
pub fn pullback_coefficients(
    a: &CoefficientField,
    phi: &DeformationMap,
    mesh: &Mesh,
    rule: JacobianRule,
) -> Result<PulledBack> {
    let n = mesh.element_count();
    let mut out = PulledBack {
        a: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
    };
    for e in 0..n {
        let (j, y) = element_jacobian(mesh, phi, e, rule);
        let det = j.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::SingularJacobian { element: e, det });
        }
        let jinv = j.try_inverse().ok_or(Error::SingularJacobian { element: e, det })?;
        let m = jinv * a.eval(y) * jinv.transpose();
        out.a.push(0.5 * (m + m.transpose()));
        out.g.push(det.abs());
    }
    Ok(out)
}

/// `S = w⁻² a^{−1/2} ã a^{−1/2}`, symmetrized.
pub fn s_matrix(a: &Matrix2<f64>, a_tilde: &Matrix2<f64>, w: f64) -> Result<Matrix2<f64>> {
    let inv_sqrt = sym2_fn(&sqrt_spd2(a)?, |x| 1.0 / x);
    let s = inv_sqrt * a_tilde * inv_sqrt / (w * w);
    let s = 0.5 * (s + s.transpose());
    let (l, _) = sym2_eigen(&s);
    if !(l[0] > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "S is not positive definite (smallest eigenvalue {:e})",
            l[0]
        )));
    }
    Ok(s)
}

/// Everything the discrete operators need, for one pair `(φ, φ̃)` on one mesh.
#[derive(Debug, Clone)]
pub struct CoefficientBundle {
    pub a: Vec<Matrix2<f64>>,
    pub g: Vec<f64>,
    pub a_tilde: Vec<Matrix2<f64>>,
    pub g_tilde: Vec<f64>,
    /// `w_e = (g_e/g̃_e)^{1/2}`.
    pub w_elem: Vec<f64>,
    pub s: Vec<Matrix2<f64>>,
    /// Area-weighted nodal averages of `g_e` and `g̃_e`.
    pub g_node: Vec<f64>,
    pub g_tilde_node: Vec<f64>,
    /// `w_i = (g_i/g̃_i)^{1/2}`.
    pub w_node: Vec<f64>,
}

impl CoefficientBundle {
    pub fn build(
        mesh: &Mesh,
        a: &CoefficientField,
        phi: &DeformationMap,
        phi_tilde: &DeformationMap,
        rule: JacobianRule,
    ) -> Result<Self> {
        let base = pullback_coefficients(a, phi, mesh, rule)?;
        let tilde = pullback_coefficients(a, phi_tilde, mesh, rule)?;
        Self::from_parts(mesh, base, tilde)
    }

    pub fn from_parts(mesh: &Mesh, base: PulledBack, tilde: PulledBack) -> Result<Self> {
        let ne = mesh.element_count();
        if base.a.len() != ne || tilde.a.len() != ne {
            return Err(Error::SizeMismatch {
                expected: ne,
                found: base.a.len().min(tilde.a.len()),
            });
        }
        let w_elem: Vec<f64> = base.g.iter().zip(&tilde.g).map(|(g, gt)| (g / gt).sqrt()).collect();
        let s = (0..ne)
            .map(|e| s_matrix(&base.a[e], &tilde.a[e], w_elem[e]))
            .collect::<Result<Vec<_>>>()?;
        let nn = mesh.node_count();
        let (mut gs, mut gts, mut ws) = (vec![0.0; nn], vec![0.0; nn], vec![0.0; nn]);
        for (e, t) in mesh.triangles.iter().enumerate() {
            for &i in t {
                gs[i] += mesh.areas[e] * base.g[e];
                gts[i] += mesh.areas[e] * tilde.g[e];
                ws[i] += mesh.areas[e];
            }
        }
        let g_node: Vec<f64> = gs.iter().zip(&ws).map(|(g, w)| g / w).collect();
        let g_tilde_node: Vec<f64> = gts.iter().zip(&ws).map(|(g, w)| g / w).collect();
        let w_node = g_node.iter().zip(&g_tilde_node).map(|(g, gt)| (g / gt).sqrt()).collect();
        Ok(Self {
            a: base.a,
            g: base.g,
            a_tilde: tilde.a,
            g_tilde: tilde.g,
            w_elem,
            s,
            g_node,
            g_tilde_node,
            w_node,
        })
    }

    /// Largest condition number of the `a_e` and `ã_e`.
    pub fn max_condition(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.a_tilde)
            .map(|m| {
                let (l, _) = sym2_eigen(m);
                l[1] / l[0]
            })
            .fold(1.0, f64::max)
    }

    /// Smallest eigenvalue over all `ã_e`.
    pub fn min_eigen_tilde(&self) -> f64 {
        self.a_tilde.iter().map(|m| sym2_eigen(m).0[0]).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::generate_mesh;
    use crate::geometry::{build_graph_map, BoundaryGraph, DirichletSpec, GraphFamily, ReferenceDomain};
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh() -> Mesh {
        generate_mesh(&ReferenceDomain::unit_square(DirichletSpec::all()), 0.1).unwrap()
    }

    #[test]
    fn identity_map_reproduces_the_coefficient() {
        let m = mesh();
        let a = CoefficientField::smooth_varying(0.3);
        for rule in [JacobianRule::Centroid, JacobianRule::Interpolant] {
            let pb = pullback_coefficients(&a, &DeformationMap::identity(), &m, rule).unwrap();
            for e in 0..m.element_count() {
                assert!((pb.a[e] - a.eval(m.centroid(e))).norm() < 1e-14);
                assert!((pb.g[e] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn uniform_scaling() {
        let m = mesh();
        let s = 1.7;
        let phi = DeformationMap::affine(Matrix2::identity() * s, Vector2::zeros()).unwrap();
        let pb = pullback_coefficients(&CoefficientField::identity(), &phi, &m, JacobianRule::Centroid).unwrap();
        for e in 0..m.element_count() {
            assert!((pb.a[e] - Matrix2::identity() / (s * s)).norm() < 1e-14);
            assert!((pb.g[e] - s * s).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_map_matches_closed_form_inverse() {
        let m = mesh();
        let (p, q, r, t) = (1.3, 0.4, -0.2, 0.9);
        let j = Matrix2::new(p, q, r, t);
        let phi = DeformationMap::affine(j, Vector2::new(0.1, -0.3)).unwrap();
        let pb = pullback_coefficients(&CoefficientField::identity(), &phi, &m, JacobianRule::Interpolant).unwrap();
        // (JᵗJ)⁻¹ written out from the 2×2 adjugate.
        let det = p * t - q * r;
        let (e11, e12, e22) = (p * p + r * r, p * q + r * t, q * q + t * t);
        let gram_det = e11 * e22 - e12 * e12;
        let oracle = Matrix2::new(e22, -e12, -e12, e11) / gram_det;
        for e in 0..m.element_count() {
            assert!((pb.a[e] - oracle).norm() < 1e-12);
            assert!((pb.g[e] - det.abs()).abs() < 1e-13);
        }
    }

    fn pair_bundle(eps: f64, a: &CoefficientField) -> (Mesh, CoefficientBundle) {
        let m = mesh();
        let flat = BoundaryGraph::constant(1.0, (0.0, 1.0));
        let bump = GraphFamily::SineBump {
            base: 1.0,
            amplitude: eps,
        }
        .build((0.0, 1.0));
        let phi_t = build_graph_map(&flat, &bump, 0.0, 1.5, 0.5).unwrap();
        let b = CoefficientBundle::build(&m, a, &DeformationMap::identity(), &phi_t, JacobianRule::Interpolant).unwrap();
        (m, b)
    }

    #[test]
    fn equal_maps_give_unit_weights_and_s() {
        let m = mesh();
        let a = CoefficientField::smooth_varying(0.2);
        let id = DeformationMap::identity();
        let b = CoefficientBundle::build(&m, &a, &id, &id, JacobianRule::Centroid).unwrap();
        assert!(b.s.iter().all(|s| (s - Matrix2::identity()).norm() < 1e-14));
        assert!(b.w_node.iter().all(|&w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn scaling_pair_s_matches_hand_reduction() {
        // φ = Id, φ̃ = s·Id, A = I: a = I, ã = s⁻²I, w² = g/g̃ = s⁻², so S = s²·s⁻²·I = I.
        let s = 1.4;
        let a = Matrix2::identity();
        let at = Matrix2::identity() / (s * s);
        let w = 1.0 / s;
        let hand = Matrix2::identity();
        assert!((s_matrix(&a, &at, w).unwrap() - hand).norm() < 1e-14);
    }

    #[test]
    fn weight_identity_and_transport_consistency() {
        let (_, b) = pair_bundle(-0.1, &CoefficientField::smooth_varying(0.3));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for e in 0..b.a.len() {
            assert!((b.w_elem[e] * b.w_elem[e] * b.g_tilde[e] - b.g[e]).abs() <= 1e-15 * b.g[e].max(1.0) * 4.0);
            let root = sqrt_spd2(&b.a[e]).unwrap();
            for _ in 0..100 {
                let z = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let lhs = (root * z).dot(&(b.s[e] * (root * z))) * b.g[e];
                let rhs = z.dot(&(b.a_tilde[e] * z)) * b.g_tilde[e];
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn tilde_coefficients_respect_ellipticity_and_tau() {
        let a = CoefficientField::smooth_varying(0.3);
        let m = mesh();
        let flat = BoundaryGraph::constant(1.0, (0.0, 1.0));
        let bump = GraphFamily::SineBump {
            base: 1.0,
            amplitude: -0.1,
        }
        .build((0.0, 1.0));
        let phi_t = build_graph_map(&flat, &bump, 0.0, 1.5, 0.5).unwrap();
        let b = CoefficientBundle::build(&m, &a, &DeformationMap::identity(), &phi_t, JacobianRule::Centroid).unwrap();
        let tau = phi_t.tau();
        let theta = a.theta();
        assert!(b.min_eigen_tilde() >= 1.0 / (theta * tau * tau) * (1.0 - 1e-12));
        assert!(b.max_condition() <= theta * tau.powi(4));
    }

    #[test]
    fn s_inverse_deviation_scales_with_jacobian_difference() {
        // |S⁻¹ − I| ≤ c (|∇φ − ∇φ̃| + |A∘φ − A∘φ̃|) with a stable constant.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ratios = Vec::new();
        for _ in 0..200 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let a = CoefficientField::smooth_varying(0.3);
            let j = Matrix2::identity();
            let jt = j + Matrix2::new(
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
            );
            let y = [x[0] + rng.random_range(-0.05..0.05), x[1]];
            let am = j.try_inverse().unwrap() * a.eval(x) * j.try_inverse().unwrap().transpose();
            let at = jt.try_inverse().unwrap() * a.eval(y) * jt.try_inverse().unwrap().transpose();
            let w = (j.determinant() / jt.determinant()).abs().sqrt();
            let s = s_matrix(&am, &(0.5 * (at + at.transpose())), w).unwrap();
            let dev = crate::linalg::norm2x2(&(s.try_inverse().unwrap() - Matrix2::identity()));
            let size = crate::linalg::norm2x2(&(jt - j)) + crate::linalg::norm2x2(&(a.eval(y) - a.eval(x)));
            ratios.push(dev / size);
        }
        let (head, tail) = ratios.split_at(100);
        let c0 = head.iter().copied().fold(0.0, f64::max);
        let c1 = tail.iter().copied().fold(0.0, f64::max);
        assert!(c1 <= 2.0 * c0 && c0 <= 2.0 * c1);
    }
}
