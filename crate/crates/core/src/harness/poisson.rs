//! Stability of the mixed Poisson problem `(L + 1)v = f` under domain
//! perturbation.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::StudyConfig;
use super::mf::mf_concentration;
use super::study::{frozen_constant, Assertion, Perturbed, StudySetup};
use crate::discretization::{Locator, Pencil};
use crate::error::{Error, Result};
use crate::geometry::{delta_p, displaced_measure, symmetric_difference, DeformationMap};

/// LHS and bound components for one perturbation magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRecord {
    pub epsilon: f64,
    /// `‖v − ṽ‖_{L²(Ω ∪ Ω̃)}`, both zero-extended.
    pub error: f64,
    /// `‖f‖_{L²(Ω ∪ Ω̃)}`.
    pub f_norm: f64,
    /// `|{x : φ(x) ≠ φ̃(x)}|`.
    pub displaced_measure: f64,
    pub delta_s: f64,
    /// `‖f∘φ − f∘φ̃‖_{L²(Ω)}`.
    pub f_shift: f64,
    pub sym_diff: f64,
    /// `M_f(c |Ω △ Ω̃|)`.
    pub mf: f64,
    /// `(|D|^{1/2 − ε} + δ_s)‖f‖ + ‖f∘φ − f∘φ̃‖`.
    pub rhs_theorem: f64,
    /// `|Ω △ Ω̃|^{1/r}‖f‖ + M_f(c|Ω △ Ω̃|)`.
    pub rhs_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonOutcome {
    pub records: Vec<PoissonRecord>,
    pub constant_theorem: f64,
    pub constant_measure: f64,
    pub assertions: Vec<Assertion>,
}

impl PoissonOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Solves `(K + M)x = M b` on free DOFs.
pub fn solve_shifted(pencil: &Pencil, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = pencil.size();
    let a = pencil.k.plus_diagonal(1.0, &pencil.mass).to_faer()?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("sparse Cholesky of K + M: {e:?}")))?;
    let b = Mat::from_fn(n, 1, |i, _| pencil.mass[i] * rhs[i]);
    let x = llt.solve(&b);
    Ok(DVector::from_fn(n, |i, _| x[(i, 0)]))
}

/// Computes the Poisson record for one perturbed problem.
pub fn poisson_record(setup: &StudySetup, p: &Perturbed) -> Result<PoissonRecord> {
    let cfg = &setup.config.poisson;
    let f = |x: [f64; 2]| cfg.source.eval(x);
    let mesh = &setup.mesh;
    let dofs = &setup.dofs;
    let id = DeformationMap::identity();

    let f_base: Vec<f64> = mesh.nodes.iter().map(|&x| f(x)).collect();
    let f_tilde: Vec<f64> = p.mapped.nodes.iter().map(|&x| f(x)).collect();
    let v = solve_shifted(&setup.base.pencil(), &dofs.restrict(&f_base))?;
    let v_t = solve_shifted(&p.tilde.pencil(), &dofs.restrict(&f_tilde))?;
    let error = p.union.distance(&dofs.extend(&v), &dofs.extend(&v_t));

    let f_norm = p.union.merged_norm(&f_base, &f_tilde);
    let lumped = mesh.lumped_mass();
    let f_shift = f_base
        .iter()
        .zip(&f_tilde)
        .zip(&lumped)
        .map(|((a, b), m)| m * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let disp = displaced_measure(&setup.domain, &id, &p.map)?;
    let sym = symmetric_difference(&setup.domain, &id, &p.map)?;
    let d_s = delta_p(&setup.domain, &id, &p.map, &setup.coefficient, cfg.s)?;

    // Pieces of Ω ∪ Ω̃: every reference element plus the image elements
    // whose centroid lies outside Ω.
    let locator = Locator::new(mesh);
    let mut areas = mesh.areas.clone();
    let mut values: Vec<f64> = (0..mesh.element_count()).map(|e| f(mesh.centroid(e))).collect();
    for e in 0..p.mapped.element_count() {
        let c = p.mapped.centroid(e);
        if locator.locate(mesh, c).is_none() {
            areas.push(p.mapped.areas[e]);
            values.push(f(c));
        }
    }
    let mf = mf_concentration(&areas, &values, cfg.mf_factor * sym)?;

    let rhs_theorem = (disp.powf(0.5 - cfg.dimension_epsilon) + d_s) * f_norm + f_shift;
    let rhs_measure = sym.powf(1.0 / cfg.r) * f_norm + mf;
    Ok(PoissonRecord {
        epsilon: p.epsilon,
        error,
        f_norm,
        displaced_measure: disp,
        delta_s: d_s,
        f_shift,
        sym_diff: sym,
        mf,
        rhs_theorem,
        rhs_measure,
    })
}

/// Runs the Poisson study alone, freezing both constants at the largest `ε`.
pub fn run_poisson_study(config: &StudyConfig) -> Result<PoissonOutcome> {
    let setup = StudySetup::new(config)?;
    super::study::identity_smoke(&setup)?;
    let records = config
        .perturbation
        .epsilons
        .iter()
        .map(|&e| setup.perturbed(e).and_then(|p| poisson_record(&setup, &p)))
        .collect::<Result<Vec<_>>>()?;
    let lhs: Vec<f64> = records.iter().map(|r| r.error).collect();
    let thm: Vec<f64> = records.iter().map(|r| r.rhs_theorem).collect();
    let meas: Vec<f64> = records.iter().map(|r| r.rhs_measure).collect();
    let (constant_theorem, a1) = frozen_constant("poisson (theorem bound)", &lhs, &thm);
    let (constant_measure, a2) = frozen_constant("poisson (measure bound)", &lhs, &meas);
    Ok(PoissonOutcome {
        records,
        constant_theorem,
        constant_measure,
        assertions: vec![a1, a2],
    })
}
