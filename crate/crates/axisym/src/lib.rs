//! Pressure-robust Bernardi–Raugel finite elements for the axisymmetric
//! Stokes problem.

pub mod analysis;
pub mod assembly;
pub mod cases;
pub mod checks;
pub mod experiments;
pub mod fe_spaces;
pub mod hdiv_recon;
pub mod mesh;
pub mod quadrature;
pub mod solver;

pub use analysis::ErrorReport;
pub use cases::ManufacturedCase;
pub use experiments::{RunConfig, Table};
pub use fe_spaces::{PressureSpace, VelocitySpace};
pub use hdiv_recon::{ReconOperator, ReconVariant};
pub use mesh::{classify, generate_unit_square_mesh, load_mesh, save_mesh, validate};
pub use mesh::{AxisTopology, ErEdge, Mesh, MeshDefect, TriangleClass};
pub use quadrature::{edge_rule, triangle_rule, EdgeQuadRule, QuadRule, QuadratureError};
pub use solver::{solve_stokes, StokesFactorization, StokesSolution};
