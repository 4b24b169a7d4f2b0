//! Fixtures shared by the benchmarks in `benches/`.

use spectral_stability::discretization::{assemble_bundle, generate_mesh};
use spectral_stability::geometry::{build_graph_map, BoundarySide};
use spectral_stability::{
    BoundaryGraph, CoefficientBundle, CoefficientField, DeformationMap, DirichletSpec, DofMap, GraphFamily,
    JacobianRule, Mesh, OperatorBundle, ReferenceDomain, Side,
};

/// Unit square with Dirichlet bottom edge and a sine-bump perturbation of the top.
pub struct Fixture {
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub coefficients: CoefficientBundle,
}

impl Fixture {
    pub fn new(h: f64, epsilon: f64) -> Self {
        let domain = ReferenceDomain::unit_square(DirichletSpec::sides(&[BoundarySide::Bottom]));
        let mesh = generate_mesh(&domain, h).expect("mesh");
        let dofs = DofMap::new(&mesh);
        let flat = BoundaryGraph::constant(1.0, (0.0, 1.0));
        let bump = GraphFamily::SineBump {
            base: 1.0,
            amplitude: epsilon,
        }
        .build((0.0, 1.0));
        let phi_t = build_graph_map(&flat, &bump, 0.0, 1.5, 0.5).expect("graph map");
        let coefficients = CoefficientBundle::build(
            &mesh,
            &CoefficientField::smooth_varying(0.3),
            &DeformationMap::identity(),
            &phi_t,
            JacobianRule::Interpolant,
        )
        .expect("coefficients");
        Self {
            mesh,
            dofs,
            coefficients,
        }
    }

    pub fn bundle(&self, side: Side) -> OperatorBundle {
        assemble_bundle(&self.mesh, &self.dofs, &self.coefficients, side).expect("assembly")
    }
}
