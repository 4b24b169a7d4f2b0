//! Generalized symmetric eigensolves `K v = λ M v` with diagonal positive `M`.
//!
//! Small problems go through the symmetric form `C = M^{-1/2} K M^{-1/2}`
//! densely. Larger ones use block shift-invert subspace iteration on
//! `(K − σM)⁻¹M` with a sparse Cholesky factor and Rayleigh–Ritz in the
//! `M` inner product.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::Pencil;
use crate::error::{Error, Result};
use crate::linalg::{mass_orthonormalize, sym_eigen, SymEigen};

/// Largest free-DOF count handled by the dense path under [`EigenMethod::Auto`].
pub const DENSE_LIMIT: usize = 2000;

/// Lowest eigenpairs of one pencil, columns `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// `‖Kv − λMv‖ / (max(λ, 1)·‖Mv‖)` per pair.
    pub residuals: Vec<f64>,
    pub mass: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Auto,
    Dense,
    ShiftInvert,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub method: EigenMethod,
    /// Seeds the starting block of the iterative path.
    pub seed: u64,
    /// Shift `σ < 0` for the iterative path; `K − σM` must be positive definite.
    pub shift: f64,
    /// Residual target for the iterative path.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            seed: 0,
            shift: -1.0,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }

    /// Columns listed in `idx`.
    pub fn block(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.vectors.nrows(), idx.len(), |i, j| self.vectors[(i, idx[j])])
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn orthonormality_defect(&self) -> f64 {
        crate::linalg::mass_orthonormality_defect(&self.vectors, &self.mass)
    }
}

/// `C = M^{-1/2} K M^{-1/2}`, symmetrized.
pub fn symmetric_form(pencil: &Pencil) -> DMatrix<f64> {
    let d = pencil.mass.map(|m| 1.0 / m.sqrt());
    let mut c = pencil.k.scaled(&d, &d).to_dense();
    crate::linalg::symmetrize(&mut c);
    c
}

/// Full eigendecomposition of the symmetric form `C` of a pencil.
pub fn full_decomposition(pencil: &Pencil) -> Result<SymEigen> {
    sym_eigen(&symmetric_form(pencil))
}

/// Lowest `k` eigenpairs.
pub fn solve_eigs(pencil: &Pencil, k: usize) -> Result<EigenSystem> {
    solve_eigs_with(pencil, k, &EigenOptions::default())
}

pub fn solve_eigs_with(pencil: &Pencil, k: usize, opts: &EigenOptions) -> Result<EigenSystem> {
    let n = pencil.size();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("requested {k} eigenpairs of a {n}-dimensional problem")));
    }
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::ShiftInvert => false,
        EigenMethod::Auto => n <= DENSE_LIMIT,
    };
    if dense {
        let dec = full_decomposition(pencil)?;
        Ok(from_decomposition(pencil, &dec, k))
    } else {
        shift_invert(pencil, k, opts)
    }
}

/// Builds the lowest-`k` system from a decomposition of the symmetric form.
pub fn from_decomposition(pencil: &Pencil, dec: &SymEigen, k: usize) -> EigenSystem {
    let n = pencil.size();
    let k = k.min(n);
    let d = pencil.mass.map(|m| 1.0 / m.sqrt());
    let mut vectors = DMatrix::from_fn(n, k, |i, j| dec.vectors[(i, j)] * d[i]);
    fix_signs(&mut vectors);
    let values: Vec<f64> = (0..k).map(|j| dec.values[j]).collect();
    let residuals = residuals(pencil, &values, &vectors);
    EigenSystem {
        values,
        vectors,
        residuals,
        mass: pencil.mass.clone(),
    }
}

/// Makes the largest-magnitude entry of every column positive.
pub fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

fn residuals(pencil: &Pencil, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    let kv = pencil.k.mul_dense(vectors);
    values
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let mv = vectors.column(j).component_mul(&pencil.mass);
            let r = kv.column(j) - &mv * lam;
            r.norm() / (lam.abs().max(1.0) * mv.norm()).max(f64::MIN_POSITIVE)
        })
        .collect()
}

fn shift_invert(pencil: &Pencil, k: usize, opts: &EigenOptions) -> Result<EigenSystem> {
    let n = pencil.size();
    if opts.shift >= 0.0 {
        return Err(Error::InvalidParameter("shift-invert needs a negative shift".into()));
    }
    let a = pencil.k.plus_diagonal(-opts.shift, &pencil.mass).to_faer()?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("sparse Cholesky of K − σM: {e:?}")))?;
    let p = (2 * k).max(k + 20).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
    let mut q = mass_orthonormalize(&start, &pencil.mass, 1e-12);
    let mut last = None;
    for _ in 0..opts.max_iter {
        // Z = (K − σM)⁻¹ M Q
        let mq = Mat::from_fn(n, q.ncols(), |i, j| pencil.mass[i] * q[(i, j)]);
        let z = llt.solve(&mq);
        let z = DMatrix::from_fn(n, q.ncols(), |i, j| z[(i, j)]);
        q = mass_orthonormalize(&z, &pencil.mass, 1e-12);
        if q.ncols() < k {
            return Err(Error::Factorization("subspace iteration lost rank".into()));
        }
        // Rayleigh–Ritz on K in the M-orthonormal basis.
        let kq = pencil.k.mul_dense(&q);
        let mut small = q.transpose() * &kq;
        crate::linalg::symmetrize(&mut small);
        let dec = sym_eigen(&small)?;
        q = &q * &dec.vectors;
        let values: Vec<f64> = dec.values.iter().take(k).copied().collect();
        let block = q.columns(0, k).into_owned();
        let res = residuals(pencil, &values, &block);
        let worst = res.iter().copied().fold(0.0, f64::max);
        last = Some((values, block, res));
        if worst <= opts.tol {
            break;
        }
    }
    let (values, mut vectors, _) = last.ok_or_else(|| Error::Factorization("no iterations run".into()))?;
    fix_signs(&mut vectors);
    let residuals = residuals(pencil, &values, &vectors);
    if residuals.iter().any(|&r| r > opts.tol.max(1e-8)) {
        return Err(Error::Factorization(format!(
            "subspace iteration did not converge, worst residual {:.3e}",
            residuals.iter().copied().fold(0.0, f64::max)
        )));
    }
    Ok(EigenSystem {
        values,
        vectors,
        residuals,
        mass: pencil.mass.clone(),
    })
}

/// Groups indices `0..values.len()` into clusters whose consecutive relative
/// gaps are below `rel_gap`.
pub fn clusters(values: &[f64], rel_gap: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(c) if relative_gap(values[*c.last().unwrap()], v) < rel_gap => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_bundle, generate_mesh, DofMap, Side};
    use crate::geometry::{BoundarySide, DeformationMap, DirichletSpec, ReferenceDomain};
    use crate::operator::{CoefficientBundle, CoefficientField, JacobianRule};
    use std::f64::consts::PI;

    fn pencil(dirichlet: DirichletSpec, h: f64) -> Pencil {
        let d = ReferenceDomain::unit_square(dirichlet);
        let m = generate_mesh(&d, h).unwrap();
        let dofs = DofMap::new(&m);
        let id = DeformationMap::identity();
        let c = CoefficientBundle::build(&m, &CoefficientField::identity(), &id, &id, JacobianRule::default()).unwrap();
        assemble_bundle(&m, &dofs, &c, Side::Base).unwrap().pencil()
    }

    #[test]
    fn dirichlet_square_lowest_eigenvalue() {
        let p = pencil(DirichletSpec::all(), 0.05);
        let s = solve_eigs(&p, 6).unwrap();
        assert!((s.values[0] / (2.0 * PI * PI) - 1.0).abs() < 0.02);
        assert!(s.orthonormality_defect() < 1e-10);
        assert!(s.max_residual() < 1e-8);
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn neumann_kernel_is_simple() {
        let p = pencil(DirichletSpec::neumann(), 0.1);
        let s = solve_eigs(&p, 3).unwrap();
        assert!(s.values[0].abs() < 1e-10);
        assert!(s.values[1] > 1.0);
        let v = s.vector(0);
        assert!((v.max() - v.min()).abs() < 1e-10);
    }

    #[test]
    fn shift_invert_matches_dense() {
        let p = pencil(DirichletSpec::sides(&[BoundarySide::Left]), 0.05);
        let dense = solve_eigs_with(&p, 8, &EigenOptions { method: EigenMethod::Dense, ..Default::default() }).unwrap();
        let it = solve_eigs_with(&p, 8, &EigenOptions { method: EigenMethod::ShiftInvert, seed: 3, ..Default::default() })
            .unwrap();
        for (a, b) in dense.values.iter().zip(&it.values) {
            assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }
        assert!(it.orthonormality_defect() < 1e-10);
        // Simple eigenvalues give identical vectors after the sign fix.
        let groups = clusters(&dense.values, 1e-6);
        for g in groups.iter().filter(|g| g.len() == 1) {
            let j = g[0];
            assert!((dense.vector(j) - it.vector(j)).amax() < 1e-6);
        }
    }

    #[test]
    fn degenerate_pair_is_clustered() {
        let p = pencil(DirichletSpec::all(), 0.1);
        let s = solve_eigs(&p, 4).unwrap();
        let c = clusters(&s.values, 1e-6);
        assert_eq!(c[0], vec![0]);
        assert_eq!(c[1], vec![1, 2]);
    }
}
