//! Constraint residuals of the trajectory optimisation problem.

pub mod block;
pub mod residuals;

pub use block::{central_difference, BlockKind, ConstraintBlock, ConstraintFn};
pub use residuals::*;
