//! Robot and terrain data, orientation kinematics and SRBD residuals.

pub mod dynamics;
pub mod robot;
pub mod rotation;
pub mod terrain;
pub mod trajectory;

pub use dynamics::{srbd_angular_residual, srbd_linear_residual, world_inertia, DynamicsSample};
pub use robot::{LegModel, LegParams, RobotModel, RobotParams, GRAVITY};
pub use rotation::{euler_rate_map, rotation};
pub use terrain::{HeightField, SurfaceFrame, TerrainModel};
pub use trajectory::{ContactSchedule, KnotState, Phase, PhaseInterval, Trajectory, CRAWL_ORDER};
