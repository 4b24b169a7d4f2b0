//! Dense linear-algebra helpers shared across modules.
//!
//! Symmetric eigensolves and singular values of large blocks go through faer;
//! everything else uses nalgebra directly.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub(crate) fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Symmetric eigen-decomposition; only the lower triangle of `a` is read.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<SymEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::SizeMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if n == 0 {
        return Ok(SymEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let evd = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("symmetric eigensolve: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| s[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut v = to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Factorization(format!("symmetric eigenvalues: {e:?}")))?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Singular values of a real matrix, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut v = to_faer(a)
        .singular_values()
        .map_err(|e| Error::Factorization(format!("singular values: {e:?}")))?;
    v.sort_by(|x, y| y.total_cmp(x));
    Ok(v)
}

/// Operator 2-norm.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Dense product through faer's blocked kernels.
pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    from_faer((to_faer(a) * to_faer(b)).as_ref())
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    use faer::linalg::solvers::Solve;
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::SizeMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let x = from_faer(to_faer(a).partial_piv_lu().solve(to_faer(b)).as_ref());
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Factorization(format!("{what} is singular")))
    }
}

/// Symmetrize in place: `(a + aᵗ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// `diag(d) * a * diag(e)`.
pub fn scale_rows_cols(a: &DMatrix<f64>, d: &DVector<f64>, e: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)] * e[j])
}

/// Closed-form eigen-decomposition of a symmetric 2×2 matrix: eigenvalues
/// ascending and the rotation whose columns are the eigenvectors.
pub fn sym2_eigen(m: &Matrix2<f64>) -> ([f64; 2], Matrix2<f64>) {
    let a = m[(0, 0)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let d = m[(1, 1)];
    let half_tr = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let l0 = half_tr - r;
    let l1 = half_tr + r;
    if b.abs() <= f64::EPSILON * (a.abs() + d.abs()).max(f64::MIN_POSITIVE) {
        return if a <= d {
            ([a, d], Matrix2::identity())
        } else {
            ([d, a], Matrix2::new(0.0, 1.0, 1.0, 0.0))
        };
    }
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    // (cos θ, sin θ) is the eigenvector of the larger eigenvalue.
    let q = Matrix2::new(-s, c, c, s);
    ([l0, l1], q)
}

/// Apply a scalar function to the spectrum of a symmetric 2×2 matrix.
pub fn sym2_fn(m: &Matrix2<f64>, f: impl Fn(f64) -> f64) -> Matrix2<f64> {
    let (l, q) = sym2_eigen(m);
    let d = Matrix2::new(f(l[0]), 0.0, 0.0, f(l[1]));
    let mut out = q * d * q.transpose();
    let off = 0.5 * (out[(0, 1)] + out[(1, 0)]);
    out[(0, 1)] = off;
    out[(1, 0)] = off;
    out
}

/// Symmetric square root of a symmetric positive definite 2×2 matrix.
pub fn sqrt_spd2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let (l, _) = sym2_eigen(m);
    if !(l[0] > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "matrix is not positive definite (smallest eigenvalue {:e})",
            l[0]
        )));
    }
    Ok(sym2_fn(m, f64::sqrt))
}

/// Spectral norm of a 2×2 matrix.
pub fn norm2x2(m: &Matrix2<f64>) -> f64 {
    let ata = m.transpose() * m;
    let (l, _) = sym2_eigen(&ata);
    l[1].max(0.0).sqrt()
}

/// Modified Gram–Schmidt in the inner product `⟨x, y⟩ = Σ mass_i x_i y_i`,
/// run twice. Columns whose norm collapses below `tol` relative to their
/// original size are dropped.
pub fn mass_orthonormalize(block: &DMatrix<f64>, mass: &DVector<f64>, tol: f64) -> DMatrix<f64> {
    let n = block.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for j in 0..block.ncols() {
        let mut v = block.column(j).into_owned();
        let orig = mass_norm(&v, mass);
        if orig == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &kept {
                let c = mass_dot(q, &v, mass);
                v.axpy(-c, q, 1.0);
            }
        }
        let nv = mass_norm(&v, mass);
        if nv > tol * orig {
            kept.push(v / nv);
        }
    }
    let mut out = DMatrix::zeros(n, kept.len());
    for (j, q) in kept.iter().enumerate() {
        out.set_column(j, q);
    }
    out
}

pub fn mass_dot(x: &DVector<f64>, y: &DVector<f64>, mass: &DVector<f64>) -> f64 {
    x.iter().zip(y.iter()).zip(mass.iter()).map(|((a, b), m)| a * b * m).sum()
}

pub fn mass_norm(x: &DVector<f64>, mass: &DVector<f64>) -> f64 {
    mass_dot(x, x, mass).max(0.0).sqrt()
}

/// `‖VᵗMV − I‖_max`.
pub fn mass_orthonormality_defect(v: &DMatrix<f64>, mass: &DVector<f64>) -> f64 {
    let mv = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| mass[i] * v[(i, j)]);
    let g = v.transpose() * mv;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
