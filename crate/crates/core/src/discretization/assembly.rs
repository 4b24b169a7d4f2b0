//! P1 assembly with one-point quadrature and lumped masses.
//!
//! With element-constant `a_e, g_e` the stiffness matrix factors exactly as
//! `K = Tᵗ W_T S T`, where `T u = (a_e^{1/2}∇u)_e`, `W_T = diag(|e|·g_e)` and
//! `S` is block diagonal (identity unless the bundle is the cross operator).
//! With the lumped mass `M_g` this realizes `H = T*T` and `T*ST` with
//! `T* = M_g⁻¹TᵗW_T`.

use nalgebra::{DMatrix, DVector, Matrix2};

use super::dofmap::DofMap;
use super::mesh::Mesh;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, sqrt_spd2};
use crate::operator::CoefficientBundle;

/// Which operator of the pair a bundle realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `(K_{a,g}, M_g)`: the operator `H`.
    Base,
    /// `(K_{ã,g̃}, M_g̃)`: the operator `H̃`.
    Tilde,
    /// `(K_{ã,g̃}, M_g)`: the operator `T*ST` on `L²(Ω, g dx)`.
    Cross,
}

/// Generalized eigenproblem data `K v = λ M v` with diagonal `M`.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub k: SparseMatrix,
    pub mass: DVector<f64>,
}

impl Pencil {
    pub fn size(&self) -> usize {
        self.mass.len()
    }
}

/// Discrete operators on the free DOFs for one side of a perturbation pair.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub side: Side,
    /// Stiffness matrix assembled element by element from `∇φ_iᵗ a ∇φ_j |e| g`.
    pub k: SparseMatrix,
    /// Lumped mass entries `m_i g_i` on free DOFs.
    pub mass: DVector<f64>,
    /// Gradient factor, `2E × n_free`.
    pub t: SparseMatrix,
    /// Element weights `|e|·g_e`.
    pub w_t: DVector<f64>,
    /// Per-element `S` blocks for the cross operator.
    pub s: Option<Vec<Matrix2<f64>>>,
    /// Nodal `w_i` on free DOFs.
    pub w: DVector<f64>,
}

/// Assembles `(K, M, T, W_T, S)` for one side.
pub fn assemble_bundle(mesh: &Mesh, dofs: &DofMap, coeffs: &CoefficientBundle, side: Side) -> Result<OperatorBundle> {
    let ne = mesh.element_count();
    if coeffs.a.len() != ne || dofs.node_count() != mesh.node_count() {
        return Err(Error::SizeMismatch {
            expected: ne,
            found: coeffs.a.len(),
        });
    }
    let (k_a, k_g, t_a, t_g, node_g) = match side {
        Side::Base => (&coeffs.a, &coeffs.g, &coeffs.a, &coeffs.g, &coeffs.g_node),
        Side::Tilde => (
            &coeffs.a_tilde,
            &coeffs.g_tilde,
            &coeffs.a_tilde,
            &coeffs.g_tilde,
            &coeffs.g_tilde_node,
        ),
        Side::Cross => (&coeffs.a_tilde, &coeffs.g_tilde, &coeffs.a, &coeffs.g, &coeffs.g_node),
    };
    let n = dofs.free_count();
    let mut k_trip = Vec::with_capacity(9 * ne);
    let mut t_trip = Vec::with_capacity(6 * ne);
    let mut w_t = DVector::zeros(ne);
    for e in 0..ne {
        let tri = mesh.triangles[e];
        let grads = mesh.gradients[e];
        let area = mesh.areas[e];
        let weight = area * k_g[e];
        for i in 0..3 {
            let Some(di) = dofs.dof(tri[i]) else { continue };
            for j in 0..3 {
                let Some(dj) = dofs.dof(tri[j]) else { continue };
                let gi = nalgebra::Vector2::new(grads[i][0], grads[i][1]);
                let gj = nalgebra::Vector2::new(grads[j][0], grads[j][1]);
                k_trip.push((di, dj, weight * gi.dot(&(k_a[e] * gj))));
            }
        }
        let root = sqrt_spd2(&t_a[e])?;
        w_t[e] = area * t_g[e];
        for i in 0..3 {
            let Some(di) = dofs.dof(tri[i]) else { continue };
            let v = root * nalgebra::Vector2::new(grads[i][0], grads[i][1]);
            t_trip.push((2 * e, di, v[0]));
            t_trip.push((2 * e + 1, di, v[1]));
        }
    }
    let lumped = mesh.lumped_mass();
    let mass = DVector::from_iterator(n, dofs.free_nodes().iter().map(|&i| lumped[i] * node_g[i]));
    let w = DVector::from_iterator(n, dofs.free_nodes().iter().map(|&i| coeffs.w_node[i]));
    Ok(OperatorBundle {
        side,
        k: SparseMatrix::from_triplets(n, n, k_trip),
        mass,
        t: SparseMatrix::from_triplets(2 * ne, n, t_trip),
        w_t,
        s: (side == Side::Cross).then(|| coeffs.s.clone()),
        w,
    })
}

impl OperatorBundle {
    pub fn size(&self) -> usize {
        self.mass.len()
    }

    pub fn pencil(&self) -> Pencil {
        Pencil {
            k: self.k.clone(),
            mass: self.mass.clone(),
        }
    }

    /// Dense `T` (`2E × n`).
    pub fn t_dense(&self) -> DMatrix<f64> {
        self.t.to_dense()
    }

    /// Dense weighted adjoint `T* = M⁻¹TᵗW_T` (`n × 2E`).
    pub fn t_adjoint_dense(&self) -> DMatrix<f64> {
        let t = self.t.to_dense();
        DMatrix::from_fn(t.ncols(), t.nrows(), |i, r| t[(r, i)] * self.w_t[r / 2] / self.mass[i])
    }

    /// Dense block-diagonal `S` (identity when absent), `2E × 2E`.
    pub fn s_dense(&self) -> DMatrix<f64> {
        let ne = self.w_t.len();
        let mut s = DMatrix::identity(2 * ne, 2 * ne);
        if let Some(blocks) = &self.s {
            for (e, b) in blocks.iter().enumerate() {
                s.fixed_view_mut::<2, 2>(2 * e, 2 * e).copy_from(b);
            }
        }
        s
    }

    /// `‖K − TᵗW_T S T‖ / ‖K‖` comparing the element-stiffness route with the factor route.
    pub fn factorization_residual(&self) -> Result<f64> {
        let t = self.t.to_dense();
        let ne = self.w_t.len();
        let mut wst = self.s_dense() * &t;
        for r in 0..2 * ne {
            let w = self.w_t[r / 2];
            wst.row_mut(r).scale_mut(w);
        }
        let kf = t.transpose() * wst;
        let k = self.k.to_dense();
        let nk = spectral_norm(&k)?;
        Ok(spectral_norm(&(k - kf))? / nk.max(f64::MIN_POSITIVE))
    }

    /// `‖M H − Hᵗ M‖ / ‖K‖` for `H = M⁻¹K`.
    pub fn self_adjointness_defect(&self) -> Result<f64> {
        let k = self.k.to_dense();
        let d = &k - k.transpose();
        Ok(spectral_norm(&d)? / spectral_norm(&k)?.max(f64::MIN_POSITIVE))
    }

    /// Dense `H = M⁻¹K`.
    pub fn h_dense(&self) -> DMatrix<f64> {
        let k = self.k.to_dense();
        DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] / self.mass[i])
    }
}

/// Pencil of `w⁻¹H̃w` on `L²(Ω, g dx)`: `(W K̃ W, M_g)`.
pub fn conjugated_tilde_pencil(tilde: &OperatorBundle, base: &OperatorBundle) -> Pencil {
    Pencil {
        k: tilde.k.scaled(&tilde.w, &tilde.w),
        mass: base.mass.clone(),
    }
}

/// Result of comparing `H̃` with `w²·T*ST`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeIdentityCheck {
    /// `‖H̃ − w²T*ST‖ / ‖H̃‖`.
    pub residual: f64,
    /// `max_i |M_g̃,i − w_i⁻² M_g,i| / M_g̃,i`.
    pub mass_defect: f64,
}

/// Checks `H̃ = w²T*ST` with `H̃ = M_g̃⁻¹K_{ã,g̃}` from the tilde bundle and
/// `T*ST = M_g⁻¹K_{ã,g̃}` from the cross bundle.
pub fn tilde_operator_identity_check(
    tilde: &OperatorBundle,
    cross: &OperatorBundle,
    w: &DVector<f64>,
) -> Result<TildeIdentityCheck> {
    if tilde.side != Side::Tilde || cross.side != Side::Cross {
        return Err(Error::InvalidParameter("expected a tilde bundle and a cross bundle".into()));
    }
    let n = tilde.size();
    if cross.size() != n || w.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: cross.size().min(w.len()),
        });
    }
    let ht = tilde.h_dense();
    let kc = cross.k.to_dense();
    let w2x = DMatrix::from_fn(n, n, |i, j| w[i] * w[i] * kc[(i, j)] / cross.mass[i]);
    let residual = spectral_norm(&(&ht - w2x))? / spectral_norm(&ht)?.max(f64::MIN_POSITIVE);
    let mass_defect = (0..n)
        .map(|i| (tilde.mass[i] - cross.mass[i] / (w[i] * w[i])).abs() / tilde.mass[i])
        .fold(0.0, f64::max);
    Ok(TildeIdentityCheck { residual, mass_defect })
}
