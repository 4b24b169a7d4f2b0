//! Schatten norms of the weighted resolvent difference
//! `(w⁻¹H̃w − ξ)⁻¹ − (H − ξ)⁻¹` on `L²(Ω, g dx)`.
//!
//! Conjugating by `M^{1/2}` turns both operators into symmetric matrices
//! `C = M^{-1/2}KM^{-1/2}` and `C̃ = M^{-1/2}WK̃WM^{-1/2}`, so each resolvent is
//! `V diag(1/(λ−ξ)) Vᵗ` from one eigendecomposition.

use faer::c64;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::eigen::full_decomposition;
use crate::discretization::{conjugated_tilde_pencil, OperatorBundle, Pencil};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, sym_eigenvalues, SymEigen};

/// Minimal distance between a shift and either spectrum.
pub const SHIFT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SchattenReport {
    /// Exponent; `f64::INFINITY` for the operator norm.
    pub r: f64,
    pub xi: Complex64,
    pub value: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
}

/// `(Σ μⁿ)^{1/r}`, or `max μ` for `r = ∞`.
pub fn schatten_norm(sv: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return sv.iter().copied().fold(0.0, f64::max);
    }
    let m = sv.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    // Scaled to avoid underflow of tiny singular values raised to r.
    m * sv.iter().map(|&s| (s / m).powf(r)).sum::<f64>().powf(1.0 / r)
}

/// Resolvents of a base pencil and a conjugated tilde pencil sharing the mass `M_g`.
#[derive(Debug, Clone)]
pub struct ResolventDifference {
    pub base: SymEigen,
    pub tilde: SymEigen,
}

impl ResolventDifference {
    pub fn new(base: &Pencil, conjugated_tilde: &Pencil) -> Result<Self> {
        if base.size() != conjugated_tilde.size() {
            return Err(Error::SizeMismatch {
                expected: base.size(),
                found: conjugated_tilde.size(),
            });
        }
        let d = (&base.mass - &conjugated_tilde.mass).amax();
        if d > 1e-12 * base.mass.amax() {
            return Err(Error::Inconsistent("resolvents must share the mass M_g".into()));
        }
        Ok(Self {
            base: full_decomposition(base)?,
            tilde: full_decomposition(conjugated_tilde)?,
        })
    }

    pub fn from_decompositions(base: SymEigen, tilde: SymEigen) -> Self {
        Self { base, tilde }
    }

    /// Distance from `ξ` to the union of both spectra.
    pub fn shift_distance(&self, xi: Complex64) -> f64 {
        self.base
            .values
            .iter()
            .chain(self.tilde.values.iter())
            .map(|&l| (Complex64::new(l, 0.0) - xi).norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_shift(&self, xi: Complex64) -> Result<()> {
        let d = self.shift_distance(xi);
        if d < SHIFT_MARGIN * xi.norm().max(1.0) {
            return Err(Error::ShiftTooClose {
                xi: format!("{xi}"),
                distance: d,
            });
        }
        Ok(())
    }

    fn real_resolvent(e: &SymEigen, xi: f64) -> DMatrix<f64> {
        let f = e.values.map(|l| 1.0 / (l - xi));
        let mut vf = e.vectors.clone();
        for (j, mut c) in vf.column_iter_mut().enumerate() {
            c *= f[j];
        }
        vf * e.vectors.transpose()
    }

    /// Symmetric-coordinate difference matrix for a real shift.
    pub fn difference_real(&self, xi: f64) -> Result<DMatrix<f64>> {
        self.check_shift(Complex64::new(xi, 0.0))?;
        Ok(Self::real_resolvent(&self.tilde, xi) - Self::real_resolvent(&self.base, xi))
    }

    /// Singular values of the difference, descending.
    pub fn singular_values(&self, xi: Complex64) -> Result<Vec<f64>> {
        if xi.im == 0.0 {
            let d = self.difference_real(xi.re)?;
            let mut sv: Vec<f64> = sym_eigenvalues(&d)?.into_iter().map(f64::abs).collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            return Ok(sv);
        }
        self.check_shift(xi)?;
        let n = self.base.values.len();
        let resolvent = |e: &SymEigen| {
            let f: Vec<Complex64> = e.values.iter().map(|&l| 1.0 / (Complex64::new(l, 0.0) - xi)).collect();
            // V diag(f) Vᵗ split into real and imaginary parts.
            let mut re = e.vectors.clone();
            let mut im = e.vectors.clone();
            for (j, fj) in f.iter().enumerate() {
                re.column_mut(j).scale_mut(fj.re);
                im.column_mut(j).scale_mut(fj.im);
            }
            let vt = e.vectors.transpose();
            (crate::linalg::matmul(&re, &vt), crate::linalg::matmul(&im, &vt))
        };
        let (br, bi) = resolvent(&self.base);
        let (tr, ti) = resolvent(&self.tilde);
        let dr = tr - br;
        let di = ti - bi;
        let m = faer::Mat::<c64>::from_fn(n, n, |i, j| c64::new(dr[(i, j)], di[(i, j)]));
        let mut sv = m
            .singular_values()
            .map_err(|e| Error::Factorization(format!("complex singular values: {e:?}")))?;
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(sv)
    }

    pub fn report(&self, xi: Complex64, r: f64) -> Result<SchattenReport> {
        let sv = self.singular_values(xi)?;
        Ok(SchattenReport {
            r,
            xi,
            value: schatten_norm(&sv, r),
            singular_values: sv,
        })
    }

    /// Reports for several exponents sharing one set of singular values.
    pub fn reports(&self, xi: Complex64, rs: &[f64]) -> Result<Vec<SchattenReport>> {
        let sv = self.singular_values(xi)?;
        Ok(rs
            .iter()
            .map(|&r| SchattenReport {
                r,
                xi,
                value: schatten_norm(&sv, r),
                singular_values: sv.clone(),
            })
            .collect())
    }
}

/// `‖(w⁻¹H̃w − ξ)⁻¹ − (H − ξ)⁻¹‖_{C^r}` in the `M_g`-weighted space.
pub fn resolvent_difference_norm(
    base: &OperatorBundle,
    tilde: &OperatorBundle,
    w: &DVector<f64>,
    xi: Complex64,
    r: f64,
) -> Result<SchattenReport> {
    if w.len() != tilde.size() {
        return Err(Error::SizeMismatch {
            expected: tilde.size(),
            found: w.len(),
        });
    }
    let mut t = tilde.clone();
    t.w = w.clone();
    let conj = conjugated_tilde_pencil(&t, base);
    ResolventDifference::new(&base.pencil(), &conj)?.report(xi, r)
}

/// Singular values of the difference computed with dense inverses of
/// `H = M⁻¹K` and `W M⁻¹K̃ W`, conjugated by `M^{1/2}`; used as a cross-check.
pub fn resolvent_difference_dense(base: &OperatorBundle, tilde: &OperatorBundle, w: &DVector<f64>, xi: f64) -> Result<Vec<f64>> {
    let n = base.size();
    let h = base.h_dense();
    let kt = tilde.k.to_dense();
    let ht = DMatrix::from_fn(n, n, |i, j| w[i] * kt[(i, j)] * w[j] / base.mass[i]);
    let eye = DMatrix::<f64>::identity(n, n);
    let shift = &eye * xi;
    let inv = |a: DMatrix<f64>| crate::linalg::lu_solve(&a, &eye, "shifted operator");
    let d = inv(ht - &shift)? - inv(h - &shift)?;
    let s = base.mass.map(f64::sqrt);
    let conj = DMatrix::from_fn(n, n, |i, j| s[i] * d[(i, j)] / s[j]);
    singular_values(&conj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_bundle, generate_mesh, DofMap, Side};
    use crate::geometry::{build_graph_map, BoundaryGraph, BoundarySide, DeformationMap, DirichletSpec, GraphFamily, ReferenceDomain};
    use crate::operator::{CoefficientBundle, CoefficientField, JacobianRule};

    fn bundles(eps: f64) -> (OperatorBundle, OperatorBundle) {
        let d = ReferenceDomain::unit_square(DirichletSpec::sides(&[BoundarySide::Bottom]));
        let m = generate_mesh(&d, 0.125).unwrap();
        let dm = DofMap::new(&m);
        let flat = BoundaryGraph::constant(1.0, (0.0, 1.0));
        let g = GraphFamily::SineBump { base: 1.0, amplitude: eps }.build((0.0, 1.0));
        let phi_t = build_graph_map(&flat, &g, 0.0, 1.5, 0.5).unwrap();
        let c = CoefficientBundle::build(&m, &CoefficientField::identity(), &DeformationMap::identity(), &phi_t, JacobianRule::default())
            .unwrap();
        (
            assemble_bundle(&m, &dm, &c, Side::Base).unwrap(),
            assemble_bundle(&m, &dm, &c, Side::Tilde).unwrap(),
        )
    }

    #[test]
    fn norm_arithmetic() {
        assert_eq!(schatten_norm(&[3.0, 4.0], 2.0), 5.0);
        assert_eq!(schatten_norm(&[3.0, 4.0], f64::INFINITY), 4.0);
        assert_eq!(schatten_norm(&[], 3.0), 0.0);
    }

    #[test]
    fn equal_operators_give_zero() {
        let (b, _) = bundles(0.0);
        let rep = resolvent_difference_norm(&b, &b, &b.w, Complex64::new(-1.0, 0.0), 2.0).unwrap();
        assert!(rep.value < 1e-13);
    }

    #[test]
    fn spectral_route_matches_dense_inverses() {
        let (b, t) = bundles(0.1);
        let rep = resolvent_difference_norm(&b, &t, &t.w, Complex64::new(-1.0, 0.0), 2.0).unwrap();
        let dense = resolvent_difference_dense(&b, &t, &t.w, -1.0).unwrap();
        assert!(rep.value > 1e-4);
        for (a, d) in rep.singular_values.iter().zip(&dense).take(20) {
            assert!((a - d).abs() < 1e-10, "{a} vs {d}");
        }
    }

    #[test]
    fn schatten_norms_decrease_in_r() {
        let (b, t) = bundles(-0.1);
        let rd = ResolventDifference::new(&b.pencil(), &conjugated_tilde_pencil(&t, &b)).unwrap();
        for xi in [Complex64::new(-1.0, 0.0), Complex64::new(5.0, 2.0)] {
            let reps = rd.reports(xi, &[1.0, 2.0, 3.0, f64::INFINITY]).unwrap();
            assert!(reps.windows(2).all(|w| w[1].value <= w[0].value * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn complex_shift_matches_real_limit() {
        let (b, t) = bundles(0.1);
        let rd = ResolventDifference::new(&b.pencil(), &conjugated_tilde_pencil(&t, &b)).unwrap();
        let real = rd.report(Complex64::new(-1.0, 0.0), 2.0).unwrap().value;
        let cplx = rd.report(Complex64::new(-1.0, 1e-9), 2.0).unwrap().value;
        assert!((real - cplx).abs() < 1e-8 * real);
    }

    #[test]
    fn shift_on_spectrum_is_rejected() {
        let (b, t) = bundles(0.1);
        let rd = ResolventDifference::new(&b.pencil(), &conjugated_tilde_pencil(&t, &b)).unwrap();
        let l = rd.base.values[0];
        assert!(matches!(rd.report(Complex64::new(l, 0.0), 2.0), Err(Error::ShiftTooClose { .. })));
    }
}
