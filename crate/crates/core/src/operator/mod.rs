//! Coefficient fields and their transport through deformation maps.

pub mod bundle;
pub mod coefficient;

pub use bundle::{pullback_coefficients, s_matrix, CoefficientBundle, JacobianRule, PulledBack};
pub use coefficient::{ellipticity_check, CoefficientField, CoefficientSpec, EllipticityCertificate};
