//! Force polytopes: exact construction from torque limits and the
//! configuration-to-polytope morphing used inside the planner.

pub mod exact;
pub mod halfspace;
pub mod morph;

pub use exact::{exact_force_polytope, force_polytope_vertices};
pub use halfspace::{hull_halfspaces, HalfspacePolytope, PolytopeDeviation};
pub use morph::{
    morph_at, morph_normal, morph_offset, morph_polar, polar_coords, polytope_jacobian, select_neighbors, PolarFootCoord,
    PolytopeJacobian, PredefinedPolytopes,
};
