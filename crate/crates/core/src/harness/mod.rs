//! Experiment drivers, reporting and verification batteries.

pub mod config;
pub mod fit;
pub mod mf;
pub mod poisson;
pub mod report;
pub mod study;
pub mod verify;

pub use config::{
    DomainConfig, Exponent, MeshConfig, OutputConfig, PerturbationConfig, PerturbationFamily, PoissonConfig,
    SourceSpec, StudyConfig, StudySettings,
};
pub use fit::{fit_loglog_slope, SlopeFit, NUMERICAL_FLOOR};
pub use mf::{mf_concentration, mf_on_mesh};
pub use poisson::{poisson_record, run_poisson_study, solve_shifted, PoissonOutcome, PoissonRecord};
pub use study::{
    frozen_constant, identity_smoke, rate_check, run_perturbation_study, study_record, Assertion, ExponentValues,
    Perturbed, RateFit, StudyOutcome, StudyRecord, StudySetup,
};
pub use verify::{
    affine_invariance, graph_pair_bundles, operator_algebra_trials, pullback_equivalence, random_coefficient,
    random_graph, selection_trials, verify_suite, AlgebraTrial, BundleTriple, PullbackEquivalence, SelectionTrials,
    VerifyReport,
};
pub use report::{
    config_hash, poisson_csv, study_csv, to_json, write_output, Metadata, POISSON_COLUMNS, SCHEMA_VERSION,
    STUDY_COLUMNS,
};
