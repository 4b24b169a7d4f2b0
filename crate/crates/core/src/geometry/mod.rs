//! Reference domains, deformation maps and vicinity measures.

pub mod domain;
pub mod graph;
pub mod map;
pub mod vicinity;

pub use domain::{BoundaryLocation, BoundaryPiece, BoundarySide, DirichletSpec, DomainKind, ReferenceDomain};
pub use graph::{BoundaryGraph, GraphFamily};
pub use map::{
    build_graph_map, build_normal_map, domain_samples, fixed_surface, DeformationMap, GraphMapParams,
    MapCertificate, MapKind, NormalMapParams,
};
pub use vicinity::{delta_p, displaced_measure, symmetric_difference, vicinity_report, VicinityReport};
