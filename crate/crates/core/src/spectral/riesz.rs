//! Spectral projectors from the Riesz formula `P = −(2πi)⁻¹∮(H − ξ)⁻¹dξ`.
//!
//! The contour is a circle discretized by the trapezoidal rule at
//! `θ_j = 2π(j + ½)/m`, so nodes come in conjugate pairs and only the upper
//! half needs a factorization. Each resolvent is applied as
//! `(K − ξM)⁻¹M` through a sparse complex LU.

use faer::c64;
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eigen::{fix_signs, EigenSystem};
use crate::discretization::Pencil;
use crate::error::{Error, Result};
use crate::linalg::{mass_orthonormalize, sym_eigen, sym_eigenvalues};

/// Circle `|ξ − center| = radius` with `points` trapezoidal nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub center: f64,
    pub radius: f64,
    pub points: usize,
}

impl Contour {
    /// Circle around the cluster mean with radius half the distance to the
    /// rest of `σ ∪ {0}`.
    pub fn around(values: &[f64], cluster: &[usize], points: usize) -> Result<Self> {
        if cluster.is_empty() {
            return Err(Error::InvalidParameter("empty cluster".into()));
        }
        let center = cluster.iter().map(|&i| values[i]).sum::<f64>() / cluster.len() as f64;
        let rest = values
            .iter()
            .enumerate()
            .filter(|(i, _)| !cluster.contains(i))
            .map(|(_, &v)| v)
            .chain(cluster.iter().all(|&i| values[i] != 0.0).then_some(0.0))
            .map(|v| (v - center).abs())
            .fold(f64::INFINITY, f64::min);
        let c = Self {
            center,
            radius: 0.5 * rest,
            points,
        };
        c.check(values, cluster)?;
        Ok(c)
    }

    /// Requires a margin of `radius/4` on both sides of the circle and a radius
    /// above the relative degeneracy threshold `10⁻⁶`.
    pub fn check(&self, values: &[f64], cluster: &[usize]) -> Result<()> {
        if self.points < 4 || !self.points.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("contour needs an even point count ≥ 4, got {}", self.points)));
        }
        if self.radius < 1e-6 * self.center.abs().max(1.0) {
            return Err(Error::ClusterNotIsolated {
                cluster: cluster.to_vec(),
                gap: 2.0 * self.radius,
            });
        }
        let margin = 0.25 * self.radius;
        for (i, &v) in values.iter().enumerate() {
            let d = (v - self.center).abs();
            let inside = cluster.contains(&i);
            if (inside && d > self.radius - margin) || (!inside && d < self.radius + margin) {
                return Err(Error::ClusterNotIsolated {
                    cluster: cluster.to_vec(),
                    gap: (d - self.radius).abs(),
                });
            }
        }
        Ok(())
    }

    /// Upper-half nodes `ξ_j` and weights `c_j` with `P = 2·Re Σ c_j (H − ξ_j)⁻¹`.
    pub fn upper_nodes(&self) -> Vec<(Complex64, Complex64)> {
        let m = self.points;
        (0..m / 2)
            .map(|j| {
                let theta = std::f64::consts::TAU * (j as f64 + 0.5) / m as f64;
                let e = Complex64::from_polar(1.0, theta);
                (self.center + self.radius * e, -(self.radius / m as f64) * e)
            })
            .collect()
    }
}

fn shifted_lu(pencil: &Pencil, xi: Complex64) -> Result<faer::sparse::linalg::solvers::Lu<usize, c64>> {
    let n = pencil.size();
    let mut trip: Vec<Triplet<usize, usize, c64>> = pencil
        .k
        .triplets()
        .map(|(r, c, v)| Triplet::new(r, c, c64::new(v, 0.0)))
        .collect();
    trip.extend((0..n).map(|i| Triplet::new(i, i, -xi * pencil.mass[i])));
    let a = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::Factorization(format!("sparse conversion: {e:?}")))?;
    a.sp_lu()
        .map_err(|e| Error::Factorization(format!("sparse LU at ξ = {xi}: {e:?}")))
}

/// `P·block` by the trapezoidal Riesz sum.
pub fn riesz_apply(pencil: &Pencil, contour: &Contour, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = pencil.size();
    if block.nrows() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: block.nrows(),
        });
    }
    let p = block.ncols();
    let rhs = Mat::<c64>::from_fn(n, p, |i, j| c64::new(pencil.mass[i] * block[(i, j)], 0.0));
    let mut acc = DMatrix::zeros(n, p);
    for (xi, c) in contour.upper_nodes() {
        let y = shifted_lu(pencil, xi)?.solve(&rhs);
        for j in 0..p {
            for i in 0..n {
                acc[(i, j)] += 2.0 * (c * y[(i, j)]).re;
            }
        }
    }
    Ok(acc)
}

/// Dense `P` (`n × n`).
pub fn riesz_matrix(pencil: &Pencil, contour: &Contour) -> Result<DMatrix<f64>> {
    let n = pencil.size();
    riesz_apply(pencil, contour, &DMatrix::identity(n, n))
}

/// `M`-orthogonal projector onto the span of `basis`.
#[derive(Debug, Clone)]
pub struct Projector {
    pub indices: Vec<usize>,
    /// `M`-orthonormal columns.
    pub basis: DMatrix<f64>,
    pub mass: DVector<f64>,
}

impl Projector {
    pub fn new(indices: Vec<usize>, basis: DMatrix<f64>, mass: DVector<f64>) -> Self {
        Self { indices, basis, mass }
    }

    /// Spectral-sum projector `Σ_{k∈G} v_k v_kᵗM`.
    pub fn from_system(system: &EigenSystem, cluster: &[usize]) -> Self {
        Self::new(cluster.to_vec(), system.block(cluster), system.mass.clone())
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Dense `P = V Vᵗ M`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let v = &self.basis;
        let mut p = v * v.transpose();
        for j in 0..p.ncols() {
            p.column_mut(j).scale_mut(self.mass[j]);
        }
        p
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mx = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| self.mass[i] * x[(i, j)]);
        &self.basis * (self.basis.transpose() * mx)
    }

    /// Returns `(‖P² − P‖, ‖MP − PᵗM‖)` relative to `‖P‖`, `‖MP‖`.
    pub fn defects(&self) -> (f64, f64) {
        let p = self.matrix();
        let idem = (&p * &p - &p).amax() / p.amax().max(f64::MIN_POSITIVE);
        let mp = DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| self.mass[i] * p[(i, j)]);
        let sym = (&mp - mp.transpose()).amax() / mp.amax().max(f64::MIN_POSITIVE);
        (idem, sym)
    }
}

/// Projector onto the cluster `G` built from the Riesz formula alone: the
/// range is recovered from `P` applied to a random probe block.
pub fn riesz_projector(pencil: &Pencil, cluster: &[usize], values: &[f64], points: usize, seed: u64) -> Result<Projector> {
    let contour = Contour::around(values, cluster, points)?;
    let n = pencil.size();
    let m = cluster.len();
    let probes = (m + 4).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, probes, |_, _| rng.random::<f64>() - 0.5);
    let y = riesz_apply(pencil, &contour, &z)?;
    let q = mass_orthonormalize(&y, &pencil.mass, 1e-8);
    if q.ncols() < m {
        return Err(Error::Inconsistent(format!(
            "Riesz image has rank {} for a cluster of size {m}",
            q.ncols()
        )));
    }
    // Rayleigh–Ritz inside the recovered range; keeps the m directions closest
    // to the cluster.
    let kq = pencil.k.mul_dense(&q);
    let mut small = q.transpose() * kq;
    crate::linalg::symmetrize(&mut small);
    let dec = sym_eigen(&small)?;
    let mut order: Vec<usize> = (0..dec.values.len()).collect();
    order.sort_by(|&a, &b| {
        (dec.values[a] - contour.center)
            .abs()
            .total_cmp(&(dec.values[b] - contour.center).abs())
    });
    let pick = DMatrix::from_fn(q.ncols(), m, |i, j| dec.vectors[(i, order[j])]);
    let mut basis = q * pick;
    fix_signs(&mut basis);
    Ok(Projector::new(cluster.to_vec(), basis, pencil.mass.clone()))
}

fn check_same_weight(p: &Projector, q: &Projector) -> Result<()> {
    if p.mass.len() != q.mass.len() || (&p.mass - &q.mass).amax() > 1e-12 * p.mass.amax() {
        return Err(Error::Inconsistent("projectors live in differently weighted spaces".into()));
    }
    Ok(())
}

/// `‖P − P̃‖` in the `M`-weighted operator norm, computed on the span of both ranges.
pub fn projector_distance(p: &Projector, q: &Projector) -> Result<f64> {
    check_same_weight(p, q)?;
    let n = p.mass.len();
    let s = p.mass.map(f64::sqrt);
    // Symmetric coordinates: orthonormal columns M^{1/2}V.
    let a = DMatrix::from_fn(n, p.rank(), |i, j| s[i] * p.basis[(i, j)]);
    let b = DMatrix::from_fn(n, q.rank(), |i, j| s[i] * q.basis[(i, j)]);
    let mut joined = DMatrix::zeros(n, a.ncols() + b.ncols());
    joined.columns_mut(0, a.ncols()).copy_from(&a);
    joined.columns_mut(a.ncols(), b.ncols()).copy_from(&b);
    let basis = mass_orthonormalize(&joined, &DVector::from_element(n, 1.0), 1e-12);
    let pa = basis.transpose() * &a;
    let pb = basis.transpose() * &b;
    let d = &pa * pa.transpose() - &pb * pb.transpose();
    Ok(sym_eigenvalues(&d)?.into_iter().map(f64::abs).fold(0.0, f64::max))
}

/// Same quantity through dense `M^{1/2}(P − P̃)M^{-1/2}`.
pub fn projector_distance_dense(p: &Projector, q: &Projector) -> Result<f64> {
    check_same_weight(p, q)?;
    let d = p.matrix() - q.matrix();
    super::identity::weighted_norm(&d, &p.mass)
}
