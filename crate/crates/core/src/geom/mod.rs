//! Mesh substrate: surfaces, fields, 2×2 algebra and discrete operators.

pub mod banded;
pub mod bolza;
pub mod field;
pub mod io;
pub mod loops;
pub mod mat2;
pub mod mesh;
pub mod ops;
pub mod regge;

pub use bolza::build_bolza_mesh;
pub use field::{MetricField, OperatorField, ScalarField};
pub use mesh::SurfaceMesh;
pub use ops::{area, gauss_curvature, integrate, laplace_beltrami, LinearOperator};
