//! Perturbation-rate studies on a fixed reference mesh.

use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{Exponent, StudyConfig};
use super::fit::{fit_loglog_slope, SlopeFit, NUMERICAL_FLOOR};
use super::poisson::{poisson_record, PoissonRecord};
use crate::discretization::{
    assemble_bundle, conjugated_tilde_pencil, generate_mesh, DofMap, Mesh, OperatorBundle, Side, UnionQuadrature,
};
use crate::error::{Error, Result};
use crate::geometry::{vicinity_report, DeformationMap, ReferenceDomain};
use crate::operator::{CoefficientBundle, CoefficientField};
use crate::selection::pair_eigenfunctions;
use crate::spectral::{
    deviation_series, from_decomposition, full_decomposition, projector_distance, riesz_projector, Projector,
    ResolventDifference,
};

/// Subdivision levels of the union quadrature for interior and cut elements.
const UNION_LEVELS: (usize, usize) = (1, 4);

/// Reference mesh, DOFs and the unperturbed operator shared by every `ε`.
#[derive(Debug, Clone)]
pub struct StudySetup {
    pub config: StudyConfig,
    pub domain: ReferenceDomain,
    pub coefficient: CoefficientField,
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub base: OperatorBundle,
    /// Lumped mass of the reference domain without weight, on free DOFs.
    pub reference_mass: DVector<f64>,
}

/// Operators of one perturbed problem `φ̃`, pulled back to the reference mesh.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub epsilon: f64,
    pub map: DeformationMap,
    pub tilde: OperatorBundle,
    /// The reference mesh pushed forward by `φ̃`.
    pub mapped: Mesh,
    pub union: UnionQuadrature,
}

impl StudySetup {
    pub fn new(config: &StudyConfig) -> Result<Self> {
        config.validate()?;
        let domain = config.domain()?;
        let coefficient = config.coefficient_field()?;
        let mesh = generate_mesh(&domain, config.mesh.h)?;
        let dofs = DofMap::new(&mesh);
        let id = DeformationMap::identity();
        let coeffs = CoefficientBundle::build(&mesh, &coefficient, &id, &id, config.jacobian_rule())?;
        let base = assemble_bundle(&mesh, &dofs, &coeffs, Side::Base)?;
        let reference_mass = dofs.restrict(&mesh.lumped_mass());
        Ok(Self {
            config: config.clone(),
            domain,
            coefficient,
            mesh,
            dofs,
            base,
            reference_mass,
        })
    }

    pub fn free_dofs(&self) -> usize {
        self.dofs.free_count()
    }

    pub fn perturbed(&self, epsilon: f64) -> Result<Perturbed> {
        let map = self.config.perturbed_map(&self.domain, epsilon)?;
        self.perturbed_with(epsilon, map)
    }

    pub fn perturbed_with(&self, epsilon: f64, map: DeformationMap) -> Result<Perturbed> {
        let coeffs = CoefficientBundle::build(
            &self.mesh,
            &self.coefficient,
            &DeformationMap::identity(),
            &map,
            self.config.jacobian_rule(),
        )?;
        let tilde = assemble_bundle(&self.mesh, &self.dofs, &coeffs, Side::Tilde)?;
        let mapped = self.mesh.mapped(&map)?;
        let union = UnionQuadrature::new(&self.mesh, &mapped, UNION_LEVELS.0, UNION_LEVELS.1);
        Ok(Perturbed {
            epsilon,
            map,
            tilde,
            mapped,
            union,
        })
    }

    /// Number of eigenvalues entering the deviation series.
    pub fn series_terms(&self) -> usize {
        let n = self.free_dofs();
        self.config.study.eigen_count.unwrap_or((n / 4).min(200)).clamp(1, n)
    }
}

/// Values of one exponent `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentValues {
    pub r: Exponent,
    /// Deviation series over the first `series_terms` eigenvalues.
    pub series: f64,
    /// Weyl-law estimate of the omitted tail (not asserted).
    pub series_tail: f64,
    /// Schatten norm of the resolvent difference at `ξ`.
    pub schatten: f64,
}

/// Measured quantities for one perturbation magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub epsilon: f64,
    pub sym_diff: f64,
    pub displaced_measure: f64,
    pub delta_p: Vec<(Exponent, f64)>,
    pub series_terms: usize,
    pub exponents: Vec<ExponentValues>,
    pub projector_distance: f64,
    /// Distance between the contour-integral projector and the spectral one.
    pub riesz_defect: f64,
    pub cluster_values: Vec<f64>,
    pub cluster_values_tilde: Vec<f64>,
    /// Paired eigenfunction distances in `L²(Ω, g dx)`.
    pub eig_weighted: Vec<f64>,
    /// Paired eigenfunction distances in `L²(Ω)`.
    pub eig_unweighted: Vec<f64>,
    /// Paired eigenfunction distances in `L²(Ω ∪ Ω̃)`, zero-extended.
    pub eig_union: Vec<f64>,
    pub poisson: PoissonRecord,
    /// Seconds; reported in JSON only.
    pub wall_time: f64,
}

impl StudyRecord {
    pub fn exponent(&self, r: f64) -> Option<&ExponentValues> {
        self.exponents.iter().find(|e| e.r.0 == r)
    }

    pub fn max_eig_union(&self) -> f64 {
        self.eig_union.iter().copied().fold(0.0, f64::max)
    }
}

/// A named pass/fail check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A fitted log-log slope with its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub name: String,
    pub fit: Option<SlopeFit>,
    pub target: f64,
    /// Constant `c` fitted at the largest `ε`.
    pub frozen_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub exploratory: bool,
    pub free_dofs: usize,
    pub identity_smoke: f64,
    pub records: Vec<StudyRecord>,
    pub fits: Vec<RateFit>,
    pub assertions: Vec<Assertion>,
}

impl StudyOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn fit(&self, name: &str) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// Checks that `φ̃ = φ` reproduces the unperturbed problem exactly and
/// returns the largest deviation seen.
pub fn identity_smoke(setup: &StudySetup) -> Result<f64> {
    let p = setup.perturbed_with(0.0, DeformationMap::identity())?;
    let dk = (p.tilde.k.to_dense() - setup.base.k.to_dense()).amax();
    let dw = p.tilde.w.iter().map(|w| (w - 1.0).abs()).fold(0.0, f64::max);
    let dm = (&p.tilde.mass - &setup.base.mass).amax();
    let v = vicinity_report(
        &setup.domain,
        &DeformationMap::identity(),
        &p.map,
        &setup.coefficient,
        &[2.0],
    )?;
    let probe: Vec<f64> = setup.mesh.nodes.iter().map(|x| x[0] + 2.0 * x[1]).collect();
    let du = p.union.distance(&probe, &probe);
    let poisson = poisson_record(setup, &p)?;
    let worst = [
        dk,
        dw,
        dm,
        v.sym_diff,
        v.displaced_measure,
        v.delta_p[0].1,
        du,
        poisson.error,
        poisson.rhs_theorem,
        poisson.rhs_measure,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if worst > 1e-12 {
        return Err(Error::Inconsistent(format!(
            "identity perturbation leaves a deviation of {worst:e}"
        )));
    }
    Ok(worst)
}

/// Computes every record quantity for one `ε`.
pub fn study_record(setup: &StudySetup, base_dec: &crate::linalg::SymEigen, epsilon: f64) -> Result<StudyRecord> {
    let start = Instant::now();
    let cfg = &setup.config;
    let p = setup.perturbed(epsilon)?;
    let base_pencil = setup.base.pencil();
    let conj = conjugated_tilde_pencil(&p.tilde, &setup.base);
    let conj_dec = full_decomposition(&conj)?;

    let k = setup.series_terms();
    let lambda: Vec<f64> = base_dec.values.iter().take(k).copied().collect();
    let lambda_t: Vec<f64> = conj_dec.values.iter().take(k).copied().collect();
    let rd = ResolventDifference::from_decompositions(base_dec.clone(), conj_dec.clone());
    let xi = Complex64::new(cfg.study.xi, 0.0);
    let mut exponents = Vec::with_capacity(cfg.study.r.len());
    for &r in &cfg.study.r {
        let s = deviation_series(&lambda, &lambda_t, r.0)?;
        let schatten = rd.report(xi, r.0)?.value;
        exponents.push(ExponentValues {
            r,
            series: s.value,
            series_tail: s.tail_estimate,
            schatten,
        });
    }

    let ps: Vec<f64> = cfg.study.delta_p.iter().map(|p| p.0).collect();
    let vic = vicinity_report(&setup.domain, &DeformationMap::identity(), &p.map, &setup.coefficient, &ps)?;

    let cluster = &cfg.study.cluster;
    let kk = cluster.iter().copied().max().unwrap_or(0) + 3;
    let base_sys = from_decomposition(&base_pencil, base_dec, kk);
    let conj_sys = from_decomposition(&conj, &conj_dec, kk);
    // M_g = w²M_g̃, so the conjugated pencil and H̃'s own pencil share their
    // symmetric form and one decomposition serves both.
    let tilde_sys = from_decomposition(&p.tilde.pencil(), &conj_dec, kk);

    let p_base = Projector::from_system(&base_sys, cluster);
    let p_conj = Projector::from_system(&conj_sys, cluster);
    let proj = projector_distance(&p_base, &p_conj)?;
    let conj_values: Vec<f64> = conj_dec.values.iter().copied().collect();
    let riesz = riesz_projector(&conj, cluster, &conj_values, cfg.study.riesz_points, cfg.study.seed)?;
    let riesz_defect = projector_distance(&riesz, &p_conj)?;

    let pairing = pair_eigenfunctions(&base_sys, &tilde_sys, &p.tilde.w, cluster, &setup.reference_mass)?;
    let eig_union = (0..cluster.len())
        .map(|j| {
            let v = pairing.selected.column(j).into_owned();
            let psi_t = pairing.given.column(j).component_mul(&p.tilde.w);
            p.union.distance(&setup.dofs.extend(&v), &setup.dofs.extend(&psi_t))
        })
        .collect();

    let poisson = poisson_record(setup, &p)?;
    Ok(StudyRecord {
        epsilon,
        sym_diff: vic.sym_diff,
        displaced_measure: vic.displaced_measure,
        delta_p: cfg.study.delta_p.iter().copied().zip(vic.delta_p.iter().map(|d| d.1)).collect(),
        series_terms: k,
        exponents,
        projector_distance: proj,
        riesz_defect,
        cluster_values: cluster.iter().map(|&i| base_sys.values[i]).collect(),
        cluster_values_tilde: cluster.iter().map(|&i| conj_sys.values[i]).collect(),
        eig_weighted: pairing.weighted,
        eig_unweighted: pairing.unweighted,
        eig_union,
        poisson,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Frozen-constant check `lhs_i ≤ c·rhs_i` with `c = lhs_0/rhs_0`.
pub fn frozen_constant(name: &str, lhs: &[f64], rhs: &[f64]) -> (f64, Assertion) {
    let c = match (lhs.first(), rhs.first()) {
        (Some(&l), Some(&r)) if r > 0.0 => l / r,
        _ => 0.0,
    };
    let worst = lhs
        .iter()
        .zip(rhs)
        .map(|(&l, &r)| l - c * r * (1.0 + 1e-9) - NUMERICAL_FLOOR)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = worst <= 0.0;
    let ratios: Vec<String> = lhs
        .iter()
        .zip(rhs)
        .map(|(&l, &r)| format!("{:.4e}", if r > 0.0 { l / r } else { 0.0 }))
        .collect();
    (
        c,
        Assertion::new(
            format!("{name}: frozen constant"),
            passed,
            format!("c = {c:.4e}; ratios [{}]", ratios.join(", ")),
        ),
    )
}

/// Fits `log y` against `log x`, freezes the constant of `y ≤ c·x^target` at
/// the first point, and records the slope and frozen-constant assertions.
/// Slopes are only asserted when `assert_slope` is set.
pub fn rate_check(
    name: &str,
    xs: &[f64],
    ys: &[f64],
    target: f64,
    tolerance: f64,
    assert_slope: bool,
    assertions: &mut Vec<Assertion>,
) -> RateFit {
    let fit = fit_loglog_slope(xs, ys).ok();
    let rhs: Vec<f64> = xs.iter().map(|x| x.powf(target)).collect();
    let (c, frozen) = frozen_constant(name, ys, &rhs);
    assertions.push(frozen);
    if assert_slope {
        let (passed, detail) = match &fit {
            Some(f) => (
                f.slope >= target - tolerance,
                format!("slope {:.4} vs target {:.4} - {tolerance}", f.slope, target),
            ),
            None => (
                ys.iter().all(|&y| y < NUMERICAL_FLOOR),
                "no usable points; passes only if every value is below the numerical floor".to_string(),
            ),
        };
        assertions.push(Assertion::new(format!("{name}: slope"), passed, detail));
    }
    RateFit {
        name: name.to_string(),
        fit,
        target,
        frozen_constant: c,
    }
}

/// Runs the full perturbation study described by `config`.
pub fn run_perturbation_study(config: &StudyConfig) -> Result<StudyOutcome> {
    let setup = StudySetup::new(config)?;
    let identity = identity_smoke(&setup)?;
    let exploratory = config.exploratory()?;
    let base_dec = full_decomposition(&setup.base.pencil())?;

    let eps = &config.perturbation.epsilons;
    let results: Vec<Result<StudyRecord>> = std::thread::scope(|s| {
        let handles: Vec<_> = eps
            .iter()
            .map(|&e| {
                let (setup, base_dec) = (&setup, &base_dec);
                s.spawn(move || study_record(setup, base_dec, e))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Inconsistent("study worker panicked".into()))))
            .collect()
    });
    let mut records = Vec::with_capacity(eps.len());
    for (r, &e) in results.into_iter().zip(eps) {
        records.push(r.map_err(|err| Error::Inconsistent(format!("epsilon = {e}: {err}")))?);
    }

    let mut assertions = Vec::new();
    for rec in &records {
        for ev in &rec.exponents {
            assertions.push(Assertion::new(
                format!("series <= schatten (eps = {}, r = {})", rec.epsilon, ev.r),
                ev.series <= ev.schatten + 1e-10,
                format!("{:.6e} vs {:.6e}", ev.series, ev.schatten),
            ));
        }
    }

    let xs: Vec<f64> = records.iter().map(|r| r.sym_diff).collect();
    let target_r = config.study.target_r;
    let tol = config.study.rate_tolerance;
    let mut fits = Vec::new();
    for &r in &config.study.r {
        let ys: Vec<f64> = records
            .iter()
            .map(|rec| rec.exponent(r.0).map_or(0.0, |e| e.series))
            .collect();
        let asserted = r.0 == target_r && !exploratory;
        let name = format!("series r={r}");
        let fit = if asserted {
            rate_check(&name, &xs, &ys, 1.0 / r.0, tol, true, &mut assertions)
        } else {
            let mut scratch = Vec::new();
            rate_check(&name, &xs, &ys, 1.0 / r.0, tol, false, &mut scratch)
        };
        fits.push(fit);
    }

    let eig: Vec<f64> = records.iter().map(StudyRecord::max_eig_union).collect();
    let monotone = eig.windows(2).all(|w| w[1] <= w[0] + NUMERICAL_FLOOR);
    if exploratory {
        let mut scratch = Vec::new();
        fits.push(rate_check("eigenfunction", &xs, &eig, 1.0 / target_r, tol, false, &mut scratch));
    } else {
        fits.push(rate_check("eigenfunction", &xs, &eig, 1.0 / target_r, tol, true, &mut assertions));
        assertions.push(Assertion::new(
            "eigenfunction: monotone decay",
            monotone,
            format!("{:?}", eig),
        ));
    }

    let lhs: Vec<f64> = records.iter().map(|r| r.poisson.error).collect();
    let rhs: Vec<f64> = records.iter().map(|r| r.poisson.rhs_theorem).collect();
    assertions.push(frozen_constant("poisson", &lhs, &rhs).1);

    Ok(StudyOutcome {
        exploratory,
        free_dofs: setup.free_dofs(),
        identity_smoke: identity,
        records,
        fits,
        assertions,
    })
}
