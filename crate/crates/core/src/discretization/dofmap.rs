//! Free/constrained degree-of-freedom bookkeeping for Dirichlet elimination.

use nalgebra::DVector;

use super::mesh::{EdgeTag, Mesh};

/// Free nodes are those not lying on a closed Dirichlet edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    free: Vec<usize>,
    dof_of_node: Vec<Option<usize>>,
    dirichlet_nodes: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut constrained = vec![false; mesh.node_count()];
        for e in &mesh.boundary {
            if e.tag == EdgeTag::Dirichlet {
                constrained[e.nodes[0]] = true;
                constrained[e.nodes[1]] = true;
            }
        }
        let mut free = Vec::new();
        let mut dirichlet_nodes = Vec::new();
        let mut dof_of_node = vec![None; mesh.node_count()];
        for (i, &c) in constrained.iter().enumerate() {
            if c {
                dirichlet_nodes.push(i);
            } else {
                dof_of_node[i] = Some(free.len());
                free.push(i);
            }
        }
        Self {
            free,
            dof_of_node,
            dirichlet_nodes,
        }
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn node_count(&self) -> usize {
        self.dof_of_node.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    /// Restricts a nodal vector to the free DOFs.
    pub fn restrict(&self, nodal: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| nodal[i]))
    }

    /// Extends a free-DOF vector to all nodes with zeros on Γ.
    pub fn extend(&self, free: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_of_node.len()];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = free[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::generate_mesh;
    use crate::geometry::{BoundarySide, DirichletSpec, ReferenceDomain};

    #[test]
    fn full_dirichlet_leaves_interior_nodes() {
        let d = ReferenceDomain::unit_square(DirichletSpec::all());
        let m = generate_mesh(&d, 0.1).unwrap();
        let dm = DofMap::new(&m);
        assert_eq!(dm.free_count(), 81);
        assert_eq!(dm.free_count() + dm.dirichlet_nodes().len(), m.node_count());
    }

    #[test]
    fn bottom_edge_constrains_one_row() {
        let d = ReferenceDomain::unit_square(DirichletSpec::sides(&[BoundarySide::Bottom]));
        let m = generate_mesh(&d, 0.1).unwrap();
        let dm = DofMap::new(&m);
        assert_eq!(dm.dirichlet_nodes().len(), 11);
        let x = DVector::from_fn(dm.free_count(), |i, _| i as f64);
        let back = dm.restrict(&dm.extend(&x));
        assert_eq!(back, x);
    }
}
