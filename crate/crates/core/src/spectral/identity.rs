//! Dense verification of the resolvent decomposition
//! `(w⁻¹H̃w − ξ)⁻¹ − (H − ξ)⁻¹ = A₁ + A₂ + A₃ + B` and of Deift's formula
//! `−ξ(T*T − ξ)⁻¹ + T*(TT* − ξ)⁻¹T = I`.
//!
//! All norms are operator norms on `L²(Ω, g dx)`, evaluated after conjugating
//! by `M^{1/2}`. Shifts are real.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::discretization::{OperatorBundle, Side, SparseMatrix};
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, matmul, spectral_norm, sqrt_spd2, sym_eigenvalues};

use super::schatten::SHIFT_MARGIN;

#[derive(Debug, Clone)]
pub struct IdentityDecomposition {
    pub xi: f64,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub a3: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `(w⁻¹H̃w − ξ)⁻¹ − (H − ξ)⁻¹` built from the tilde bundle.
    pub lhs: DMatrix<f64>,
    /// `‖LHS − (A₁+A₂+A₃+B)‖ / ‖LHS‖`.
    pub residual: f64,
    /// `‖B − ((T*ST − ξ)⁻¹ − (T*T − ξ)⁻¹)‖ / ‖(T*ST − ξ)⁻¹ − (T*T − ξ)⁻¹‖`.
    pub b_residual: f64,
}

fn inverse(a: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    lu_solve(&a, &DMatrix::identity(n, n), what)
}

/// `diag(blocks) * x` for a block-diagonal matrix of 2×2 blocks.
fn block_apply(blocks: &[Matrix2<f64>], x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x.clone();
    for (e, b) in blocks.iter().enumerate() {
        let rows = x.rows(2 * e, 2);
        y.rows_mut(2 * e, 2).copy_from(&(b * rows));
    }
    y
}

fn shifted(a: &DMatrix<f64>, xi: f64) -> DMatrix<f64> {
    let mut s = a.clone();
    for i in 0..s.nrows() {
        s[(i, i)] -= xi;
    }
    s
}

/// Operator norm on the `M`-weighted space.
pub fn weighted_norm(a: &DMatrix<f64>, mass: &DVector<f64>) -> Result<f64> {
    let s = mass.map(f64::sqrt);
    let c = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| s[i] * a[(i, j)] / s[j]);
    spectral_norm(&c)
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale > 1e-300 {
        diff / scale
    } else {
        diff
    }
}

fn check_shift(values: &[f64], xi: f64, extra_zero: bool) -> Result<()> {
    let mut d = values.iter().map(|&l| (l - xi).abs()).fold(f64::INFINITY, f64::min);
    if extra_zero {
        d = d.min(xi.abs());
    }
    if d < SHIFT_MARGIN * xi.abs().max(1.0) {
        return Err(Error::ShiftTooClose {
            xi: format!("{xi}"),
            distance: d,
        });
    }
    Ok(())
}

fn generalized_values(k: &DMatrix<f64>, mass: &DVector<f64>) -> Result<Vec<f64>> {
    let d = mass.map(|m| 1.0 / m.sqrt());
    let mut c = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| d[i] * k[(i, j)] * d[j]);
    crate::linalg::symmetrize(&mut c);
    sym_eigenvalues(&c)
}

/// `T* = M⁻¹TᵗW_T` densely.
fn adjoint(t: &DMatrix<f64>, w_t: &DVector<f64>, mass: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(t.ncols(), t.nrows(), |i, r| t[(r, i)] * w_t[r / 2] / mass[i])
}

/// Builds every term of the decomposition for the pair `(H, H̃)` with the
/// cross bundle supplying `T*ST` and `S`.
pub fn identity_decomposition(
    base: &OperatorBundle,
    tilde: &OperatorBundle,
    cross: &OperatorBundle,
    w: &DVector<f64>,
    xi: f64,
) -> Result<IdentityDecomposition> {
    if base.side != Side::Base || tilde.side != Side::Tilde || cross.side != Side::Cross {
        return Err(Error::InvalidParameter("expected base, tilde and cross bundles".into()));
    }
    let n = base.size();
    if tilde.size() != n || cross.size() != n || w.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: tilde.size().min(cross.size()).min(w.len()),
        });
    }
    let s_blocks = cross
        .s
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("cross bundle carries no S".into()))?;
    let mass = &base.mass;
    let k = base.k.to_dense();
    let kx = cross.k.to_dense();
    let kt = tilde.k.to_dense();
    check_shift(&generalized_values(&k, mass)?, xi, false)?;
    check_shift(&generalized_values(&kx, mass)?, xi, false)?;
    check_shift(&generalized_values(&kt, &tilde.mass)?, xi, false)?;

    let h = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / mass[i]);
    let x = DMatrix::from_fn(n, n, |i, j| kx[(i, j)] / mass[i]);
    // w⁻¹H̃w from the tilde bundle's own mass.
    let ht_conj = DMatrix::from_fn(n, n, |i, j| kt[(i, j)] * w[j] / (tilde.mass[i] * w[i]));
    let wxw = DMatrix::from_fn(n, n, |i, j| w[i] * x[(i, j)] * w[j]);

    let r_h = inverse(shifted(&h, xi), "H − ξ")?;
    let r_x = inverse(shifted(&x, xi), "T*ST − ξ")?;
    let r_t = inverse(shifted(&wxw, xi), "wT*STw − ξ")?;
    let lhs = inverse(shifted(&ht_conj, xi), "w⁻¹H̃w − ξ")? - &r_h;

    let one_minus_w = w.map(|v| 1.0 - v);
    let a1 = DMatrix::from_fn(n, n, |i, j| one_minus_w[i] * r_t[(i, j)]);
    let a2 = DMatrix::from_fn(n, n, |i, j| w[i] * r_t[(i, j)] * one_minus_w[j]);
    let w_minus_winv = w.map(|v| v - 1.0 / v);
    let mid = DMatrix::from_fn(n, n, |i, j| w_minus_winv[i] * r_t[(i, j)] * w[j]);
    let a3 = matmul(&r_x, &mid) * (-xi);

    // Element-space pieces, applied right to left with solves.
    let t = base.t.to_dense();
    let ts = adjoint(&t, &base.w_t, mass);
    let mut s_half = Vec::with_capacity(s_blocks.len());
    let mut s_inv_minus_i = Vec::with_capacity(s_blocks.len());
    for (e, s) in s_blocks.iter().enumerate() {
        s_half.push(sqrt_spd2(s)?);
        let inv = s
            .try_inverse()
            .ok_or_else(|| Error::Factorization(format!("S block {e} is singular")))?;
        s_inv_minus_i.push(inv - Matrix2::identity());
    }
    let f = matmul(&t, &ts);
    let g = block_apply(&s_half, &block_apply(&s_half, &f.transpose()).transpose());
    let right = lu_solve(&shifted(&f, xi), &t, "TT* − ξ")?;
    let right = block_apply(&s_half, &block_apply(&s_inv_minus_i, &right));
    let right = lu_solve(&shifted(&g, xi), &right, "S^{1/2}TT*S^{1/2} − ξ")?;
    let b = matmul(&ts, &block_apply(&s_half, &right));

    let sum = &a1 + &a2 + &a3 + &b;
    let lhs_norm = weighted_norm(&lhs, mass)?;
    let residual = relative(weighted_norm(&(&lhs - sum), mass)?, lhs_norm);
    let b_target = &r_x - &r_h;
    let b_residual = relative(weighted_norm(&(&b - &b_target), mass)?, weighted_norm(&b_target, mass)?);
    Ok(IdentityDecomposition {
        xi,
        a1,
        a2,
        a3,
        b,
        lhs,
        residual,
        b_residual,
    })
}

/// `‖−ξ(T*T − ξ)⁻¹ + T*(TT* − ξ)⁻¹T − I‖` with `T* = M⁻¹TᵗW_T`, where `W_T`
/// holds one weight per row pair of `T`.
pub fn deift_residual(t: &SparseMatrix, w_t: &DVector<f64>, mass: &DVector<f64>, xi: f64) -> Result<f64> {
    let n = t.ncols();
    if mass.len() != n || w_t.len() * 2 != t.nrows() {
        return Err(Error::SizeMismatch {
            expected: n,
            found: mass.len(),
        });
    }
    let td = t.to_dense();
    let ts = adjoint(&td, w_t, mass);
    let tst = matmul(&ts, &td);
    let k = DMatrix::from_fn(n, n, |i, j| tst[(i, j)] * mass[i]);
    check_shift(&generalized_values(&k, mass)?, xi, true)?;
    let left = inverse(shifted(&tst, xi), "T*T − ξ")? * (-xi);
    let right = matmul(&ts, &lu_solve(&shifted(&matmul(&td, &ts), xi), &td, "TT* − ξ")?);
    let d = left + right - DMatrix::<f64>::identity(n, n);
    weighted_norm(&d, mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_bundle, generate_graph_mesh, DofMap};
    use crate::geometry::{build_graph_map, BoundaryGraph, BoundarySide, DeformationMap, DirichletSpec, GraphFamily, ReferenceDomain};
    use crate::operator::{CoefficientBundle, CoefficientField, JacobianRule};

    fn bundles(eps1: f64, eps2: f64) -> (OperatorBundle, OperatorBundle, OperatorBundle) {
        let d = ReferenceDomain::unit_square(DirichletSpec::sides(&[BoundarySide::Bottom]));
        let m = generate_graph_mesh(&d, 7, 6).unwrap();
        let dm = DofMap::new(&m);
        let flat = BoundaryGraph::constant(1.0, (0.0, 1.0));
        let g1 = GraphFamily::SineBump { base: 1.0, amplitude: eps1 }.build((0.0, 1.0));
        let g2 = GraphFamily::CosineMode { base: 1.0, amplitude: eps2, mode: 2.0 }.build((0.0, 1.0));
        let phi = if eps1 == 0.0 { DeformationMap::identity() } else { build_graph_map(&flat, &g1, 0.0, 1.5, 0.5).unwrap() };
        let phi_t = build_graph_map(&flat, &g2, 0.0, 1.5, 0.5).unwrap();
        let c = CoefficientBundle::build(&m, &CoefficientField::smooth_varying(0.3), &phi, &phi_t, JacobianRule::default()).unwrap();
        (
            assemble_bundle(&m, &dm, &c, Side::Base).unwrap(),
            assemble_bundle(&m, &dm, &c, Side::Tilde).unwrap(),
            assemble_bundle(&m, &dm, &c, Side::Cross).unwrap(),
        )
    }

    #[test]
    fn decomposition_is_exact() {
        let (b, t, x) = bundles(0.1, -0.12);
        let d = identity_decomposition(&b, &t, &x, &t.w, -1.0).unwrap();
        assert!(weighted_norm(&d.lhs, &b.mass).unwrap() > 1e-4);
        assert!(d.residual < 1e-10, "residual {}", d.residual);
        assert!(d.b_residual < 1e-10, "B residual {}", d.b_residual);
    }

    #[test]
    fn equal_maps_give_zero_terms() {
        let (b, t, x) = bundles(0.0, 0.0);
        let d = identity_decomposition(&b, &t, &x, &t.w, -1.0).unwrap();
        for m in [&d.a1, &d.a2, &d.a3, &d.b, &d.lhs] {
            assert!(m.amax() < 1e-12);
        }
    }

    #[test]
    fn deift_formula_holds() {
        let (b, _, _) = bundles(0.1, 0.1);
        assert!(deift_residual(&b.t, &b.w_t, &b.mass, -1.0).unwrap() < 1e-11);
        assert!(deift_residual(&b.t, &b.w_t, &b.mass, -1e3).unwrap() < 1e-9);
    }

    #[test]
    fn deift_scalar_case() {
        // T = [e; 0] with unit weights: −ξ/(e²−ξ) + e²/(e²−ξ) = 1.
        let t = SparseMatrix::from_triplets(2, 1, vec![(0, 0, 1.7)]);
        let r = deift_residual(&t, &DVector::from_element(1, 1.0), &DVector::from_element(1, 1.0), -0.3).unwrap();
        assert!(r < 1e-15);
        assert!(deift_residual(&t, &DVector::from_element(1, 1.0), &DVector::from_element(1, 1.0), 0.0).is_err());
    }
}
