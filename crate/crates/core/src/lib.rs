//! Trajectory optimisation for legged robots with a single-rigid-body model,
//! configuration-dependent force polytopes and leg-geometry clearance.

pub mod constraints;
pub mod error;
pub mod model;
pub mod nlp;
pub mod polytope;
pub mod validate;

pub use error::{Error, Result};
pub use model::{ContactSchedule, RobotModel, RobotParams, TerrainModel, Trajectory};
pub use polytope::HalfspacePolytope;
