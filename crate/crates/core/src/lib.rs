//! Spectral stability of mixed Dirichlet–Neumann elliptic eigenproblems
//! under domain perturbation.
//!
//! Domains are deformed by explicit bi-Lipschitz maps, operators are pulled
//! back to a fixed reference mesh, and eigenvalues, eigenprojectors and
//! eigenfunctions of the two problems are compared against the size of the
//! perturbation `|Ω △ Ω̃|`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretization;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod selection;
pub mod spectral;

pub use error::{Error, Result};

pub use discretization::{DofMap, Mesh, OperatorBundle, Pencil, Side};
pub use geometry::{BoundaryGraph, DeformationMap, DirichletSpec, GraphFamily, ReferenceDomain};
pub use harness::{Exponent, PoissonOutcome, StudyConfig, StudyOutcome, StudyRecord, VerifyReport};
pub use operator::{CoefficientBundle, CoefficientField, JacobianRule};
pub use selection::{pair_eigenfunctions, select_basis, Pairing, Selection, SubspacePair};
pub use spectral::{EigenSystem, ResolventDifference, SchattenReport};
