//! Post-hoc oracles independent of the planner.

pub mod audit;
pub mod collision;
pub mod foothold;
pub mod leg;
pub mod torque;

pub use audit::{audit, AuditReport, AUDIT_TOL};
pub use collision::{collision_sweep, Body, Penetration, PENETRATION_TOL};
pub use foothold::{straddling_footholds, Straddle, LEVEL_TOL};
pub use leg::{KneeDirection, LegDof, PlanarLeg};
pub use torque::{torque_replay, JointTorque, TorqueReport, MINOR_VIOLATION};
