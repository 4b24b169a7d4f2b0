//! Identity and property battery: exact operator algebra on random graph
//! pairs, pull-back equivalence, the selection lemma on random subspaces,
//! contour projectors, Schatten and min-max monotonicity, and a fault-injected
//! negative control.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::study::{identity_smoke, Assertion, StudySetup};
use super::StudyConfig;
use crate::discretization::{
    assemble_bundle, conjugated_tilde_pencil, generate_graph_mesh, generate_mesh, tilde_operator_identity_check,
    DofMap, Mesh, OperatorBundle, Pencil, Side,
};
use crate::error::Result;
use crate::geometry::{
    build_graph_map, BoundaryGraph, BoundarySide, DeformationMap, DirichletSpec, GraphFamily, ReferenceDomain,
};
use crate::linalg::{mass_orthonormalize, sym_eigenvalues};
use crate::operator::{CoefficientBundle, CoefficientField, JacobianRule};
use crate::selection::{select_basis, SubspacePair};
use crate::spectral::{
    deift_residual, full_decomposition, identity_decomposition, projector_distance, riesz_projector, solve_eigs,
    symmetric_form, Projector, ResolventDifference,
};

/// Identity tolerances of the exact operator algebra.
pub const IDENTITY_TOL: f64 = 1e-10;
pub const DEIFT_TOL: f64 = 1e-11;

/// Random boundary graph over `(0, 1)` staying within `[0.8, 1.2]`.
pub fn random_graph(rng: &mut impl Rng) -> BoundaryGraph {
    let base = rng.random_range(0.95..1.05);
    let amplitude = rng.random_range(-0.15..0.15);
    let family = match rng.random_range(0..3) {
        0 => GraphFamily::SineBump { base, amplitude },
        1 => GraphFamily::CosineMode {
            base,
            amplitude,
            mode: rng.random_range(1.0..4.0),
        },
        _ => GraphFamily::CompactBump {
            base,
            amplitude,
            center: rng.random_range(0.3..0.7),
            width: rng.random_range(0.15..0.3),
        },
    };
    family.build((0.0, 1.0))
}

/// Random Lipschitz coefficient with ellipticity constant at most 2.
pub fn random_coefficient(rng: &mut impl Rng) -> CoefficientField {
    match rng.random_range(0..3) {
        0 => CoefficientField::identity(),
        1 => CoefficientField::smooth_varying(rng.random_range(-0.4..0.4)),
        _ => CoefficientField::constant_anisotropic(
            rng.random_range(0.6..1.6),
            rng.random_range(0.6..1.6),
            rng.random_range(0.0..std::f64::consts::PI),
        ),
    }
}

/// Base, tilde and cross bundles of one configuration.
#[derive(Debug, Clone)]
pub struct BundleTriple {
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub base: OperatorBundle,
    pub tilde: OperatorBundle,
    pub cross: OperatorBundle,
}

/// Bundles for `φ: Ω → subgraph(g₁)`, `φ̃: Ω → subgraph(g₂)` on the unit
/// square with Γ the bottom edge, meshed by an `nx × ny` grid.
pub fn graph_pair_bundles(
    g1: &BoundaryGraph,
    g2: &BoundaryGraph,
    a: &CoefficientField,
    nx: usize,
    ny: usize,
) -> Result<BundleTriple> {
    let domain = ReferenceDomain::unit_square(DirichletSpec::sides(&[BoundarySide::Bottom]));
    let mesh = generate_graph_mesh(&domain, nx, ny)?;
    let dofs = DofMap::new(&mesh);
    let flat = BoundaryGraph::constant(1.0, (0.0, 1.0));
    let phi = build_graph_map(&flat, g1, 0.0, 1.5, 0.5)?;
    let phi_t = build_graph_map(&flat, g2, 0.0, 1.5, 0.5)?;
    let c = CoefficientBundle::build(&mesh, a, &phi, &phi_t, JacobianRule::Interpolant)?;
    Ok(BundleTriple {
        base: assemble_bundle(&mesh, &dofs, &c, Side::Base)?,
        tilde: assemble_bundle(&mesh, &dofs, &c, Side::Tilde)?,
        cross: assemble_bundle(&mesh, &dofs, &c, Side::Cross)?,
        mesh,
        dofs,
    })
}

/// Residuals of one random configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraTrial {
    pub identity: f64,
    pub b_residual: f64,
    pub deift_base: f64,
    pub deift_tilde: f64,
    pub tilde_identity: f64,
    pub free_dofs: usize,
}

impl AlgebraTrial {
    pub fn passed(&self) -> bool {
        self.identity <= IDENTITY_TOL
            && self.b_residual <= IDENTITY_TOL
            && self.deift_base <= DEIFT_TOL
            && self.deift_tilde <= DEIFT_TOL
            && self.tilde_identity <= IDENTITY_TOL
    }
}

/// Runs the resolvent decomposition, Deift's formula and `H̃ = w²T*ST` on
/// `trials` random graph pairs at shift `xi`.
pub fn operator_algebra_trials(seed: u64, trials: usize, nx: usize, ny: usize, xi: f64) -> Result<Vec<AlgebraTrial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Inputs are drawn in order so results do not depend on scheduling.
    let inputs: Vec<_> = (0..trials)
        .map(|_| (random_graph(&mut rng), random_graph(&mut rng), random_coefficient(&mut rng)))
        .collect();
    let trial = |(g1, g2, a): &(BoundaryGraph, BoundaryGraph, CoefficientField)| -> Result<AlgebraTrial> {
        let b = graph_pair_bundles(g1, g2, a, nx, ny)?;
        let dec = identity_decomposition(&b.base, &b.tilde, &b.cross, &b.tilde.w, xi)?;
        Ok(AlgebraTrial {
            identity: dec.residual,
            b_residual: dec.b_residual,
            deift_base: deift_residual(&b.base.t, &b.base.w_t, &b.base.mass, xi)?,
            deift_tilde: deift_residual(&b.tilde.t, &b.tilde.w_t, &b.tilde.mass, xi)?,
            tilde_identity: tilde_operator_identity_check(&b.tilde, &b.cross, &b.tilde.w)?.residual,
            free_dofs: b.base.size(),
        })
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials.max(1));
    let chunk = trials.div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = inputs
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(trial).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(trials);
        for h in handles {
            out.extend(h.join().expect("trial thread panicked")?);
        }
        Ok(out)
    })
}

fn max_relative(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

fn pencil_eigenvalues(p: &Pencil) -> Result<Vec<f64>> {
    sym_eigenvalues(&symmetric_form(p))
}

/// Relative eigenvalue gaps between `w²T*ST` from the cross bundle and `H̃`
/// assembled directly on the image mesh `φ̃(mesh)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullbackEquivalence {
    /// `w²T*ST` against the pulled-back `H̃`.
    pub cross_vs_tilde: f64,
    /// Pulled-back `H̃` against direct assembly on the image mesh.
    pub tilde_vs_direct: f64,
}

/// Compares the pulled-back tilde operator with a direct assembly on the
/// image of the mesh. Exact for the interpolant Jacobian rule.
pub fn pullback_equivalence(
    mesh: &Mesh,
    a: &CoefficientField,
    phi_t: &DeformationMap,
) -> Result<PullbackEquivalence> {
    let dofs = DofMap::new(mesh);
    let id = DeformationMap::identity();
    let c = CoefficientBundle::build(mesh, a, &id, phi_t, JacobianRule::Interpolant)?;
    let tilde = assemble_bundle(mesh, &dofs, &c, Side::Tilde)?;
    let cross = assemble_bundle(mesh, &dofs, &c, Side::Cross)?;
    let image = mesh.mapped(phi_t)?;
    let direct_c = CoefficientBundle::build(&image, a, &id, &id, JacobianRule::Interpolant)?;
    let direct = assemble_bundle(&image, &dofs, &direct_c, Side::Base)?;

    let w2 = tilde.w.map(|w| w * w);
    // w²M_g⁻¹K_c = (M_g/w²)⁻¹K_c
    let cross_pencil = Pencil {
        k: cross.k.clone(),
        mass: cross.mass.component_div(&w2),
    };
    let lt = pencil_eigenvalues(&tilde.pencil())?;
    let lc = pencil_eigenvalues(&cross_pencil)?;
    let ld = pencil_eigenvalues(&direct.pencil())?;
    Ok(PullbackEquivalence {
        cross_vs_tilde: max_relative(&lc, &lt),
        tilde_vs_direct: max_relative(&lt, &ld),
    })
}

/// Relative eigenvalue defect of the affine scaling law: the pulled-back
/// problem for `x ↦ s·R(angle)x + c` has eigenvalues `λ/s²` when `A` is
/// isotropic and constant.
pub fn affine_invariance(mesh: &Mesh, s: f64, angle: f64) -> Result<f64> {
    let (sn, cs) = angle.sin_cos();
    let m = Matrix2::new(cs, -sn, sn, cs) * s;
    let phi_t = DeformationMap::affine(m, Vector2::new(0.3, -0.2))?;
    let dofs = DofMap::new(mesh);
    let a = CoefficientField::identity();
    let c = CoefficientBundle::build(mesh, &a, &DeformationMap::identity(), &phi_t, JacobianRule::Interpolant)?;
    let base = assemble_bundle(mesh, &dofs, &c, Side::Base)?;
    let tilde = assemble_bundle(mesh, &dofs, &c, Side::Tilde)?;
    let l: Vec<f64> = pencil_eigenvalues(&base.pencil())?.iter().map(|x| x / (s * s)).collect();
    let lt = pencil_eigenvalues(&tilde.pencil())?;
    Ok(max_relative(&l, &lt))
}

/// Counts from random subspace pairs run through the selection construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrials {
    pub trials: usize,
    pub vacuous: usize,
    /// Calls that errored or exceeded `5^k‖P_U − P_V‖`.
    pub bound_failures: usize,
    /// `m = 1` trials with `‖u − v‖ > √2‖P_U − P_V‖`.
    pub sqrt2_failures: usize,
    /// Trials with `‖P_U − P_V‖ ≤ 1/6` and a cross Gram entry above `3‖P_U − P_V‖`.
    pub gram_failures: usize,
    /// Largest `‖u_k − v_k‖ / (5^k‖P_U − P_V‖)` seen.
    pub worst_ratio: f64,
}

impl SelectionTrials {
    pub fn passed(&self) -> bool {
        self.bound_failures == 0 && self.sqrt2_failures == 0 && self.gram_failures == 0
    }
}

/// A random orthonormal `U` and a `V` obtained by perturbing `U` with noise of
/// log-uniform size and then mixing its basis by a random rotation.
fn random_pair(rng: &mut impl Rng, ambient: usize, m: usize) -> Result<SubspacePair> {
    let mass = DVector::from_fn(ambient, |_, _| rng.random_range(0.5..2.0));
    let raw = DMatrix::from_fn(ambient, m, |_, _| rng.random::<f64>() - 0.5);
    let u = mass_orthonormalize(&raw, &mass, 1e-12);
    let size = 10f64.powf(rng.random_range(-5.0..0.5));
    let noise = DMatrix::from_fn(ambient, m, |_, _| size * (rng.random::<f64>() - 0.5));
    let v = mass_orthonormalize(&(&u + noise), &mass, 1e-12);
    let mix = mass_orthonormalize(
        &DMatrix::from_fn(m, m, |_, _| rng.random::<f64>() - 0.5),
        &DVector::from_element(m, 1.0),
        1e-12,
    );
    SubspacePair::new(mass, u, v * mix)
}

pub fn selection_trials(seed: u64, trials: usize, ambient: usize, max_m: usize) -> SelectionTrials {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SelectionTrials {
        trials,
        vacuous: 0,
        bound_failures: 0,
        sqrt2_failures: 0,
        gram_failures: 0,
        worst_ratio: 0.0,
    };
    for _ in 0..trials {
        let m = rng.random_range(1..=max_m);
        let Ok(pair) = random_pair(&mut rng, ambient, m) else {
            out.bound_failures += 1;
            continue;
        };
        let d = pair.distance;
        match select_basis(&pair) {
            Ok(sel) => {
                if sel.vacuous {
                    out.vacuous += 1;
                    continue;
                }
                for (k, &dist) in sel.distances.iter().enumerate() {
                    let bound = 5f64.powi(k as i32 + 1) * d;
                    if bound > 0.0 {
                        out.worst_ratio = out.worst_ratio.max(dist / bound);
                    }
                    if dist > bound + 1e-12 {
                        out.bound_failures += 1;
                    }
                }
                if m == 1 && sel.distances[0] > 2f64.sqrt() * d + 1e-12 {
                    out.sqrt2_failures += 1;
                }
                if let Some(g) = sel.cross_gram {
                    if g > 3.0 * d + 1e-12 {
                        out.gram_failures += 1;
                    }
                }
            }
            Err(_) => out.bound_failures += 1,
        }
    }
    out
}

/// Machine-readable outcome of the battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Assertion>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(checks: &mut Vec<Assertion>, name: &str, result: Result<(bool, String)>) {
    checks.push(match result {
        Ok((passed, detail)) => Assertion::new(name, passed, detail),
        Err(e) => Assertion::new(name, false, format!("error: {e}")),
    });
}

/// Runs every check at desk scale. Failures are reported, not raised.
pub fn verify_suite(seed: u64) -> VerifyReport {
    let mut checks = Vec::new();

    check(&mut checks, "operator algebra on random graph pairs", (|| {
        let trials = operator_algebra_trials(seed, 5, 11, 8, -1.0)?;
        let worst = |f: fn(&AlgebraTrial) -> f64| trials.iter().map(f).fold(0.0, f64::max);
        Ok((
            trials.iter().all(AlgebraTrial::passed),
            format!(
                "identity {:.2e}, B {:.2e}, deift {:.2e}, tilde {:.2e}",
                worst(|t| t.identity),
                worst(|t| t.b_residual),
                worst(|t| t.deift_base.max(t.deift_tilde)),
                worst(|t| t.tilde_identity)
            ),
        ))
    })());

    check(&mut checks, "negative control: corrupted w", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let b = graph_pair_bundles(
            &random_graph(&mut rng),
            &random_graph(&mut rng),
            &CoefficientField::identity(),
            9,
            7,
        )?;
        let mut w = b.tilde.w.clone();
        let i = w.len() / 2;
        w[i] *= 1.01;
        let clean = tilde_operator_identity_check(&b.tilde, &b.cross, &b.tilde.w)?.residual;
        let bad = tilde_operator_identity_check(&b.tilde, &b.cross, &w)?.residual;
        Ok((
            clean <= IDENTITY_TOL && bad > 1e3 * IDENTITY_TOL,
            format!("clean {clean:.2e}, corrupted {bad:.2e}"),
        ))
    })());

    check(&mut checks, "pull-back equivalence", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let domain = ReferenceDomain::unit_square(DirichletSpec::sides(&[BoundarySide::Bottom]));
        let mesh = generate_graph_mesh(&domain, 10, 8)?;
        let flat = BoundaryGraph::constant(1.0, (0.0, 1.0));
        let phi_t = build_graph_map(&flat, &random_graph(&mut rng), 0.0, 1.5, 0.5)?;
        let e = pullback_equivalence(&mesh, &random_coefficient(&mut rng), &phi_t)?;
        let affine = affine_invariance(&mesh, 1.7, 0.4)?;
        Ok((
            e.cross_vs_tilde <= IDENTITY_TOL && e.tilde_vs_direct <= IDENTITY_TOL && affine <= IDENTITY_TOL,
            format!(
                "cross {:.2e}, direct {:.2e}, affine {affine:.2e}",
                e.cross_vs_tilde, e.tilde_vs_direct
            ),
        ))
    })());

    check(&mut checks, "selection lemma trials", {
        let t = selection_trials(seed, 200, 20, 5);
        Ok((
            t.passed(),
            format!(
                "{} trials, {} vacuous, worst ratio {:.3}",
                t.trials, t.vacuous, t.worst_ratio
            ),
        ))
    });

    check(&mut checks, "riesz projector matches spectral projector", (|| {
        let d = ReferenceDomain::unit_square(DirichletSpec::all());
        let mesh = generate_mesh(&d, 0.1)?;
        let dofs = DofMap::new(&mesh);
        let id = DeformationMap::identity();
        let c = CoefficientBundle::build(&mesh, &CoefficientField::identity(), &id, &id, JacobianRule::Interpolant)?;
        let pencil = assemble_bundle(&mesh, &dofs, &c, Side::Base)?.pencil();
        let sys = solve_eigs(&pencil, 6)?;
        let mut worst: f64 = 0.0;
        for cluster in [vec![0], vec![1, 2]] {
            let r = riesz_projector(&pencil, &cluster, &sys.values, 32, seed)?;
            worst = worst.max(projector_distance(&r, &Projector::from_system(&sys, &cluster))?);
        }
        Ok((worst <= 1e-8, format!("distance {worst:.2e}")))
    })());

    check(&mut checks, "schatten monotonicity", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
        let b = graph_pair_bundles(
            &BoundaryGraph::constant(1.0, (0.0, 1.0)),
            &random_graph(&mut rng),
            &CoefficientField::identity(),
            9,
            7,
        )?;
        let conj = conjugated_tilde_pencil(&b.tilde, &b.base);
        let rd = ResolventDifference::new(&b.base.pencil(), &conj)?;
        let vals: Vec<f64> = rd
            .reports(Complex64::new(-1.0, 0.0), &[1.0, 2.0, 3.0, f64::INFINITY])?
            .iter()
            .map(|r| r.value)
            .collect();
        Ok((
            vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
            format!("{vals:?}"),
        ))
    })());

    check(&mut checks, "min-max monotonicity in the Dirichlet set", (|| {
        let values = |dirichlet: DirichletSpec| -> Result<Vec<f64>> {
            let d = ReferenceDomain::unit_square(dirichlet);
            let mesh = generate_mesh(&d, 0.1)?;
            let dofs = DofMap::new(&mesh);
            let id = DeformationMap::identity();
            let c =
                CoefficientBundle::build(&mesh, &CoefficientField::smooth_varying(0.3), &id, &id, JacobianRule::Interpolant)?;
            let dec = full_decomposition(&assemble_bundle(&mesh, &dofs, &c, Side::Base)?.pencil())?;
            Ok(dec.values.iter().copied().collect())
        };
        let neumann = values(DirichletSpec::neumann())?;
        let bottom = values(DirichletSpec::sides(&[BoundarySide::Bottom]))?;
        let all = values(DirichletSpec::all())?;
        let ordered = |lo: &[f64], hi: &[f64]| lo.iter().zip(hi).all(|(a, b)| *a <= b + 1e-10 * b.abs().max(1.0));
        Ok((
            ordered(&neumann, &bottom) && ordered(&bottom, &all),
            format!("λ₁: {:.4} ≤ {:.4} ≤ {:.4}", neumann[0], bottom[0], all[0]),
        ))
    })());

    check(&mut checks, "identity map end to end", (|| {
        let cfg = StudyConfig::from_toml(
            r#"
[domain]
kind = "graph-cylinder"
interval = [0.0, 1.0]
floor = 0.0
ceiling = 1.5
rho = 0.5
graph = { family = "constant", base = 1.0 }

[dirichlet]
pieces = [{ piece = "side", side = "bottom" }]

[perturbation]
family = "none"
epsilons = [0.1]

[mesh]
h = 0.125
"#,
        )?;
        let worst = identity_smoke(&StudySetup::new(&cfg)?)?;
        Ok((worst <= 1e-14, format!("largest deviation {worst:e}")))
    })());

    VerifyReport { seed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_seed_passes() {
        let r = verify_suite(0);
        for c in &r.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn corrupted_weight_is_detected() {
        let r = verify_suite(7);
        let c = r.checks.iter().find(|c| c.name.starts_with("negative control")).unwrap();
        assert!(c.passed, "{}", c.detail);
    }

    #[test]
    fn m1_selection_meets_sqrt2() {
        let t = selection_trials(3, 300, 12, 1);
        assert!(t.passed());
        assert!(t.worst_ratio <= 1.0);
    }
}
