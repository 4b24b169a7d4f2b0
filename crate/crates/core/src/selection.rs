//! Selection of an orthonormal basis `v₁,…,v_m` of a subspace `V` close to a
//! given orthonormal basis `u₁,…,u_m` of `U`, with
//! `‖u_k − v_k‖ ≤ 5^k‖P_U − P_V‖`, and its use for pairing eigenfunctions
//! across a perturbation.
//!
//! Inner products are `⟨x, y⟩ = xᵗMy` for a diagonal positive `M`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mass_dot, mass_norm, mass_orthonormality_defect, mass_orthonormalize};
use crate::spectral::eigen::relative_gap;
use crate::spectral::{projector_distance, EigenSystem, Projector};

/// Tolerance on the orthonormality of input blocks.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Below this `‖P_V u_k‖` counts as zero.
const ZERO_PROJECTION: f64 = 1e-14;
/// Slack on the bound certificates for rounding.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SubspacePair {
    pub mass: DVector<f64>,
    /// The given basis of `U`.
    pub u: DMatrix<f64>,
    /// Any orthonormal basis of `V`.
    pub v: DMatrix<f64>,
    /// `‖P_U − P_V‖` in the `M`-weighted operator norm.
    pub distance: f64,
}

impl SubspacePair {
    pub fn new(mass: DVector<f64>, u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() || u.nrows() != v.nrows() || u.nrows() != mass.len() {
            return Err(Error::SizeMismatch {
                expected: u.ncols(),
                found: v.ncols(),
            });
        }
        if u.ncols() == 0 {
            return Err(Error::InvalidParameter("subspaces must be nontrivial".into()));
        }
        for (name, b) in [("U", &u), ("V", &v)] {
            let d = mass_orthonormality_defect(b, &mass);
            if d > ORTHONORMAL_TOL {
                return Err(Error::Inconsistent(format!("{name} basis is not orthonormal (defect {d:.3e})")));
            }
        }
        let pu = Projector::new(Vec::new(), u.clone(), mass.clone());
        let pv = Projector::new(Vec::new(), v.clone(), mass.clone());
        let distance = projector_distance(&pu, &pv)?;
        Ok(Self { mass, u, v, distance })
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    fn project_v(&self, x: &DVector<f64>) -> DVector<f64> {
        let mx = x.component_mul(&self.mass);
        &self.v * (self.v.transpose() * mx)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    /// Selected orthonormal basis of `V`, column `k` paired with `u_k`.
    #[serde(skip)]
    pub basis: DMatrix<f64>,
    /// `‖u_k − v_k‖`.
    pub distances: Vec<f64>,
    pub projector_distance: f64,
    /// `‖P_U − P_V‖ ≥ 1`: the bound is vacuous and `V`'s basis is returned as is.
    pub vacuous: bool,
    /// `max_{k≠l} |⟨z_k, z_l⟩|` when `‖P_U − P_V‖ ≤ 1/6`.
    pub cross_gram: Option<f64>,
}

/// Runs the construction and certifies `‖u_k − v_k‖ ≤ 5^k‖P_U − P_V‖` for every `k`.
pub fn select_basis(pair: &SubspacePair) -> Result<Selection> {
    let m = pair.dim();
    let d = pair.distance;
    let distances_to = |basis: &DMatrix<f64>| -> Vec<f64> {
        (0..m)
            .map(|k| mass_norm(&(pair.u.column(k) - basis.column(k)).into_owned(), &pair.mass))
            .collect()
    };
    if d >= 1.0 {
        let basis = pair.v.clone();
        return Ok(Selection {
            distances: distances_to(&basis),
            basis,
            projector_distance: d,
            vacuous: true,
            cross_gram: None,
        });
    }
    // z_k = P_V u_k / ‖P_V u_k‖.
    let mut z = DMatrix::zeros(pair.u.nrows(), m);
    for k in 0..m {
        let p = pair.project_v(&pair.u.column(k).into_owned());
        let norm = mass_norm(&p, &pair.mass);
        if norm <= ZERO_PROJECTION {
            return Err(Error::Inconsistent(format!(
                "P_V u_{} vanishes although ‖P_U − P_V‖ = {d:.3e} < 1",
                k + 1
            )));
        }
        z.set_column(k, &(p / norm));
    }
    let cross_gram = (d <= 1.0 / 6.0).then(|| {
        let mut worst = 0.0f64;
        for k in 0..m {
            for l in 0..k {
                let g = mass_dot(&z.column(k).into_owned(), &z.column(l).into_owned(), &pair.mass);
                worst = worst.max(g.abs());
            }
        }
        worst
    });
    if let Some(g) = cross_gram {
        if g > 3.0 * d + BOUND_SLACK {
            return Err(Error::Inconsistent(format!(
                "cross Gram entry {g:.3e} exceeds 3‖P_U − P_V‖ = {:.3e}",
                3.0 * d
            )));
        }
    }
    // Gram–Schmidt in order, with one reorthogonalization pass.
    let mut basis = DMatrix::zeros(pair.u.nrows(), m);
    for k in 0..m {
        let mut x = z.column(k).into_owned();
        for _ in 0..2 {
            for l in 0..k {
                let b = basis.column(l).into_owned();
                let c = mass_dot(&b, &x, &pair.mass);
                x -= b * c;
            }
        }
        let norm = mass_norm(&x, &pair.mass);
        if norm <= ZERO_PROJECTION {
            return Err(Error::Inconsistent(format!("Gram–Schmidt breakdown at k = {}", k + 1)));
        }
        basis.set_column(k, &(x / norm));
    }
    let distances = distances_to(&basis);
    for (k, &dist) in distances.iter().enumerate() {
        let bound = 5f64.powi(k as i32 + 1) * d;
        if dist > bound + BOUND_SLACK {
            return Err(Error::SelectionBound {
                k: k + 1,
                distance: dist,
                bound,
            });
        }
    }
    Ok(Selection {
        basis,
        distances,
        projector_distance: d,
        vacuous: false,
        cross_gram,
    })
}

/// Eigenfunctions of `H` selected against the frame `w⁻¹ψ_k[H̃]`.
#[derive(Debug, Clone)]
pub struct Pairing {
    pub cluster: Vec<usize>,
    pub selection: Selection,
    /// `u_k = w⁻¹ψ_k[H̃]`, `M_g`-orthonormal.
    pub given: DMatrix<f64>,
    /// Selected eigenfunctions of `H`.
    pub selected: DMatrix<f64>,
    /// `‖u_k − v_k‖` in `L²(Ω, g dx)`.
    pub weighted: Vec<f64>,
    /// `‖u_k − v_k‖` in the unweighted reference norm.
    pub unweighted: Vec<f64>,
}

/// Checks that `cluster` is a contiguous index block separated from its
/// neighbours by a relative gap of at least `min_gap`.
pub fn check_isolated(values: &[f64], cluster: &[usize], min_gap: f64) -> Result<()> {
    let (Some(&lo), Some(&hi)) = (cluster.iter().min(), cluster.iter().max()) else {
        return Err(Error::InvalidParameter("empty cluster".into()));
    };
    if hi + 1 - lo != cluster.len() || hi + 1 >= values.len() {
        return Err(Error::ClusterNotIsolated {
            cluster: cluster.to_vec(),
            gap: 0.0,
        });
    }
    let below = if lo > 0 { relative_gap(values[lo - 1], values[lo]) } else { f64::INFINITY };
    let above = relative_gap(values[hi], values[hi + 1]);
    let gap = below.min(above);
    if gap < min_gap {
        return Err(Error::ClusterNotIsolated {
            cluster: cluster.to_vec(),
            gap,
        });
    }
    Ok(())
}

/// Pairs the `H`-eigenfunctions of `cluster` with `w⁻¹ψ_k[H̃]`: the tilde
/// frame is the given basis and the `H`-eigenspace is the target.
pub fn pair_eigenfunctions(
    base: &EigenSystem,
    tilde: &EigenSystem,
    w: &DVector<f64>,
    cluster: &[usize],
    reference_mass: &DVector<f64>,
) -> Result<Pairing> {
    check_isolated(&base.values, cluster, 1e-4)?;
    check_isolated(&tilde.values, cluster, 1e-4)?;
    let n = base.mass.len();
    if tilde.mass.len() != n || w.len() != n || reference_mass.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: tilde.mass.len(),
        });
    }
    let raw = DMatrix::from_fn(n, cluster.len(), |i, j| tilde.vectors[(i, cluster[j])] / w[i]);
    let given = mass_orthonormalize(&raw, &base.mass, 1e-10);
    if given.ncols() != cluster.len() {
        return Err(Error::Inconsistent("transported tilde eigenfunctions are dependent".into()));
    }
    let pair = SubspacePair::new(base.mass.clone(), given.clone(), base.block(cluster))?;
    let selection = select_basis(&pair)?;
    let selected = selection.basis.clone();
    let unweighted = (0..cluster.len())
        .map(|k| mass_norm(&(given.column(k) - selected.column(k)).into_owned(), reference_mass))
        .collect();
    Ok(Pairing {
        cluster: cluster.to_vec(),
        weighted: selection.distances.clone(),
        selection,
        given,
        selected,
        unweighted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthonormal(rng: &mut ChaCha8Rng, mass: &DVector<f64>, m: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(mass.len(), m, |_, _| rng.random::<f64>() - 0.5);
        mass_orthonormalize(&a, mass, 1e-12)
    }

    #[test]
    fn identical_subspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mass = DVector::from_fn(12, |i, _| 0.5 + 0.1 * i as f64);
        let u = random_orthonormal(&mut rng, &mass, 3);
        let s = select_basis(&SubspacePair::new(mass, u.clone(), u.clone()).unwrap()).unwrap();
        assert!(s.distances.iter().all(|&d| d < 1e-12));
        assert!((s.basis - u).amax() < 1e-12);
    }

    #[test]
    fn small_rotation_of_a_line() {
        let mass = DVector::from_element(3, 1.0);
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let t: f64 = 0.1;
        let v = DMatrix::from_column_slice(3, 1, &[t.cos(), t.sin(), 0.0]);
        let pair = SubspacePair::new(mass, u, v).unwrap();
        assert!((pair.distance - t.sin()).abs() < 1e-14);
        let s = select_basis(&pair).unwrap();
        // The selected vector is the positive multiple of P_V u.
        assert!((s.distances[0] - 2.0 * (t / 2.0).sin()).abs() < 1e-14);
        assert!(s.distances[0] <= 2f64.sqrt() * pair.distance);
    }

    #[test]
    fn orthogonal_spaces_take_the_vacuous_branch() {
        let mass = DVector::from_element(4, 1.0);
        let u = DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let v = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 0.0]);
        let s = select_basis(&SubspacePair::new(mass, u, v.clone()).unwrap()).unwrap();
        assert!(s.vacuous);
        assert_eq!(s.basis, v);
    }

    #[test]
    fn roles_are_not_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mass = DVector::from_element(10, 1.0);
        let u = random_orthonormal(&mut rng, &mass, 3);
        let noise = DMatrix::from_fn(10, 3, |_, _| 0.05 * (rng.random::<f64>() - 0.5));
        let v = mass_orthonormalize(&(&u + noise), &mass, 1e-12);
        let a = select_basis(&SubspacePair::new(mass.clone(), u.clone(), v.clone()).unwrap()).unwrap();
        let b = select_basis(&SubspacePair::new(mass, v, u).unwrap()).unwrap();
        assert!((a.distances[0] - b.distances[0]).abs() > 1e-8 || (a.distances[2] - b.distances[2]).abs() > 1e-8);
    }

    #[test]
    fn isolation_check() {
        let v = [1.0, 2.0, 2.0 + 1e-9, 3.0];
        assert!(check_isolated(&v, &[0], 1e-4).is_ok());
        assert!(check_isolated(&v, &[1], 1e-4).is_err());
        assert!(check_isolated(&v, &[1, 2], 1e-4).is_ok());
        assert!(check_isolated(&v, &[3], 1e-4).is_err());
    }
}
