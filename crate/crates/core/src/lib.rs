//! Finite element stress recovery and energy-norm error estimation for 2D linear
//! elasticity.
//!
//! The recovered field σ* is a continuous moving least squares (MLS) fit of the
//! finite element stresses, augmented with smoothly weighted boundary-equilibrium
//! terms at the nearest boundary points and Lagrange-multiplier constraints that
//! enforce the internal equilibrium equation at the evaluation point (the `MLSCX`
//! variant). For cracked domains the stress is split into a singular part, built
//! from stress intensity factors extracted with the interaction integral, and a
//! smooth part that is recovered.
//!
//! Modules:
//! - [`mesh`]: unstructured meshes, quadrisection refinement with hanging nodes,
//!   support geometry queries.
//! - [`fem`]: plane-strain solver.
//! - [`problems`]: closed-form benchmarks (polynomial square, thick cylinder,
//!   Westergaard crack).
//! - [`recovery`]: the MLS recovery in four variants.
//! - [`fracture`]: asymptotic crack-tip fields, SIF extraction, stress splitting.
//! - [`estimate`]: error norms, effectivity indices and adaptive sizing.
//! - [`cli`]: batch driver producing CSV, VTK and a run manifest.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimate;
pub mod fem;
pub mod fracture;
pub mod mesh;
pub mod problems;
pub mod recovery;

#[cfg(feature = "cli")]
pub mod cli;

mod par;

pub use nalgebra::{Point2, Vector2, Vector3};

/// Physical coordinates.
pub type Point = Point2<f64>;
/// Stress in Voigt order `(σxx, σyy, σxy)`.
pub type Stress = Vector3<f64>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown element type `{0}`")]
    UnknownElementType(String),
    #[error("element {element} would have a non-positive Jacobian determinant")]
    InvertedElement { element: usize },
    #[error("point ({x}, {y}) lies outside the mesh")]
    PointOutsideMesh { x: f64, y: f64 },
    #[error("constrained stiffness is singular at equation {equation} (pivot {pivot:e}): rigid-body modes are not restrained")]
    RigidBody { equation: usize, pivot: f64 },
    #[error("mesh file line {line}: {message}")]
    MeshFormat { line: usize, message: String },
    #[error("support at ({x}, {y}) has too few samples after {attempts} enlargements")]
    SparseSupport { x: f64, y: f64, attempts: usize },
    #[error("field evaluated at singular point ({x}, {y})")]
    SingularPoint { x: f64, y: f64 },
    #[error("SIF extraction domain of radius {radius} contains no elements")]
    EmptyExtractionDomain { radius: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
