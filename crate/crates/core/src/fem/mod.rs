//! Plane-strain linear elasticity: bases, quadrature, assembly with multipoint and
//! Dirichlet constraints, the direct solver and finite element stress evaluation.

pub mod assembly;
pub mod material;
pub mod quadrature;
pub mod shape;
pub mod solver;
mod solution;

pub use assembly::{assemble, DofMap, LinearSystem};
pub use material::Material;
pub use quadrature::{Purpose, Rule};
pub use shape::ElementType;
pub use solution::{solve, Solution};
