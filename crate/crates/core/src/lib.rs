//! Coarse-grained truss lattice mechanics.
//!
//! A periodic lattice is meshed with bilinear quadrilaterals outside
//! full-resolution regions. Ghost nodes follow the element interpolation and
//! the lattice energy is evaluated on a small set of sampling nodes whose
//! weights reproduce the element-wise energy exactly for fields the mesh can
//! represent. The crate also provides progressive strut failure, error norms
//! against full-resolution references and a configuration-driven harness.

pub mod assembly;
pub mod error;
pub mod error_analysis;
pub mod fracture;
pub mod geometry;
pub mod harness;
pub mod lattice;
pub mod mesh;
pub mod sampling;
pub mod solver;

pub use assembly::{Constraint, Solution};
pub use error::{QcError, Result};
pub use error_analysis::{ConvergenceFit, ErrorReport};
pub use geometry::{Axis, Rect, Vec2};
pub use lattice::{LatticeModel, Material};
pub use mesh::{CoarseMesh, MeshSpec};
pub use sampling::{SamplingAssignment, Scheme};
