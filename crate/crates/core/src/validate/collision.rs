//! Collision sweep of feet and shins against the sharp terrain.

use nalgebra::Vector3;
use serde::Serialize;

use crate::constraints::residuals::{knee_point, shin_probe_fractions};
use crate::model::{RobotModel, TerrainModel, Trajectory};

/// Penetrations shallower than this are ignored, m.
pub const PENETRATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    Foot,
    Shin,
    Knee,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Penetration {
    pub leg: usize,
    pub leg_name: String,
    /// Knot at the start of the interpolated segment.
    pub knot: usize,
    pub substep: usize,
    pub time: f64,
    pub body: Body,
    /// Position along foot→knee, 0 at the foot.
    pub fraction: f64,
    pub point: [f64; 3],
    pub depth: f64,
}

/// Checks the foot, the shin probes and the knee of every leg against
/// `terrain` at `substeps` points per knot interval plus the final knot.
///
/// Base pose and feet are interpolated linearly between knots. The shin is
/// the straight segment used by the planner, probed at the same
/// `n_probe + 1` fractions, so a sweep with `substeps = 1` flags nothing that
/// the shin clearance block accepted on the smoothed terrain: the smoothing
/// ramp only ever raises the surface.
pub fn collision_sweep(
    trajectory: &Trajectory,
    terrain: &TerrainModel,
    model: &RobotModel,
    substeps: usize,
    n_probe: usize,
) -> Vec<Penetration> {
    let substeps = substeps.max(1);
    let n = trajectory.knots.len();
    let fractions: Vec<f64> = std::iter::once(0.0).chain(shin_probe_fractions(n_probe)).collect();
    let mut hits = Vec::new();
    for k in 0..n {
        let steps = if k + 1 < n { substeps } else { 1 };
        let a = &trajectory.knots[k];
        let b = trajectory.knots.get(k + 1).unwrap_or(a);
        for j in 0..steps {
            let s = j as f64 / substeps as f64;
            let yaw = a.theta[2] + s * (b.theta[2] - a.theta[2]);
            for (i, leg) in model.legs.iter().enumerate() {
                let foot: Vector3<f64> = a.feet[i] + s * (b.feet[i] - a.feet[i]);
                let knee = knee_point(&foot, yaw, model.shin_length, leg.shin_angle);
                for &t in &fractions {
                    let p = foot + t * (knee - foot);
                    let depth = terrain.height(p.x, p.y) - p.z;
                    if depth > PENETRATION_TOL {
                        let body = match t {
                            t if t == 0.0 => Body::Foot,
                            t if t == 1.0 => Body::Knee,
                            _ => Body::Shin,
                        };
                        hits.push(Penetration {
                            leg: i,
                            leg_name: leg.name.clone(),
                            knot: k,
                            substep: j,
                            time: trajectory.time(k) + s * trajectory.dt,
                            body,
                            fraction: t,
                            point: [p.x, p.y, p.z],
                            depth,
                        });
                    }
                }
            }
        }
    }
    hits
}
