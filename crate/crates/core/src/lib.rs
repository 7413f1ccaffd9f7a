//! Reconstruction of traction-free cavities in a 2D linear isotropic elastic
//! plate from boundary traction/displacement pairs.
//!
//! The library minimizes a phase-field relaxation of a Kohn-Vogelius energy-gap
//! functional: the cavity is modeled as an ersatz inclusion with elastic tensor
//! `delta * C0`, the perimeter penalty is replaced by a Modica-Mortola term, and
//! the resulting obstacle-type variational inequality is integrated by a
//! semi-implicit gradient flow whose per-step quadratic program is solved with a
//! primal-dual active set method.
//!
//! Core math is generic over the scalar type (`f32`/`f64`) through the
//! [`Scalar`] trait; concrete `f64` aliases are exported at the crate root and
//! used by the CLI and the experiment drivers.

pub mod config;
pub mod elasticity;
pub mod export;
pub mod functional;
pub mod geom;
pub mod inversion;
pub mod mesh;
pub mod pdas;
pub mod scalar;
pub mod sparse;
pub mod synthdata;

pub use scalar::Scalar;

/// Double-precision aliases used by the CLI and the acceptance drivers.
pub type Point64 = geom::Point2<f64>;
pub type Shape64 = geom::ShapeSpec<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type Field64 = mesh::NodalField<f64>;
pub type Material64 = elasticity::IsotropicMaterial<f64>;
pub type Measurement64 = synthdata::Measurement<f64>;
pub type InversionConfig64 = inversion::InversionConfig<f64>;

/// Single-precision aliases (reduced-precision experiments).
pub type Mesh32 = mesh::Mesh<f32>;
pub type Field32 = mesh::NodalField<f32>;
