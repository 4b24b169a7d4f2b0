//! Eigensolves, resolvent differences, operator identities, Riesz projectors
//! and eigenvalue series.

pub mod eigen;
pub mod identity;
pub mod riesz;
pub mod schatten;
pub mod series;

pub use eigen::{
    clusters, fix_signs, from_decomposition, full_decomposition, solve_eigs, solve_eigs_with, symmetric_form,
    EigenMethod, EigenOptions, EigenSystem, DENSE_LIMIT,
};
pub use schatten::{
    resolvent_difference_dense, resolvent_difference_norm, schatten_norm, ResolventDifference, SchattenReport,
    SHIFT_MARGIN,
};
pub use identity::{deift_residual, identity_decomposition, weighted_norm, IdentityDecomposition};
pub use riesz::{
    projector_distance, projector_distance_dense, riesz_apply, riesz_matrix, riesz_projector, Contour, Projector,
};
pub use series::{cstar_partial, deviation_series, property_p_fit, CStarReport, PropertyPFit, SeriesValue};
