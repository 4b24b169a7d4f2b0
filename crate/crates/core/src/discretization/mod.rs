//! Meshes, DOF maps, P1 assembly and inter-mesh transport.

pub mod assembly;
pub mod dofmap;
pub mod mesh;
pub mod sparse;
pub mod transport;

pub use assembly::{
    assemble_bundle, conjugated_tilde_pencil, tilde_operator_identity_check, OperatorBundle, Pencil, Side,
    TildeIdentityCheck,
};
pub use dofmap::DofMap;
pub use mesh::{generate_disk_mesh, generate_graph_mesh, generate_mesh, BoundaryEdge, EdgeTag, Mesh};
pub use sparse::SparseMatrix;
pub use transport::{Locator, UnionQuadrature};
