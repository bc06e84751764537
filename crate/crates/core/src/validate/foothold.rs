//! Edge-straddling check of stance footholds.

use nalgebra::Vector3;
use serde::Serialize;

use crate::model::{TerrainModel, Trajectory};

/// Height differences below this count as level, m.
pub const LEVEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Straddle {
    pub leg: usize,
    pub knot: usize,
    pub point: [f64; 3],
    /// Largest |h(p ± r·heading) − h(p)|.
    pub step: f64,
}

/// Lists stance knots whose foothold has a terrain height change within
/// `radius` of it along the base heading. Use the sharp terrain.
pub fn straddling_footholds(trajectory: &Trajectory, terrain: &TerrainModel, radius: f64) -> Vec<Straddle> {
    let mut out = Vec::new();
    for (k, s) in trajectory.knots.iter().enumerate() {
        let heading = Vector3::new(s.theta[2].cos(), s.theta[2].sin(), 0.0) * radius;
        for (i, p) in s.feet.iter().enumerate() {
            if !trajectory.in_stance(k, i) {
                continue;
            }
            let h = terrain.height(p.x, p.y);
            let step = [p + heading, p - heading]
                .iter()
                .map(|q| (terrain.height(q.x, q.y) - h).abs())
                .fold(0.0, f64::max);
            if step > LEVEL_TOL {
                out.push(Straddle { leg: i, knot: k, point: [p.x, p.y, p.z], step });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContactSchedule, KnotState, RobotModel};

    fn posed(x: f64) -> Trajectory {
        let model = RobotModel::hyq_like();
        let r = Vector3::new(x, 0.0, 0.5);
        let mut s = KnotState::at_rest(r, Vector3::zeros(), 4);
        for i in 0..4 {
            s.feet[i] = r + model.legs[i].nominal_foot;
        }
        Trajectory::new(0.1, vec![s; 2], ContactSchedule::all_stance(4, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn flags_only_feet_near_the_edge() {
        let terrain = TerrainModel::pallet(0.1, 0.5, 0.7, 0.03, 2000.0, 0.01).unwrap().sharp();
        // front feet at x = 0.51, hind feet far behind
        let hits = straddling_footholds(&posed(0.51 - 0.3735), &terrain, 0.02);
        assert_eq!(hits.len(), 4);
        assert!(hits.iter().all(|h| h.leg < 2 && h.step == 0.1));
        assert!(straddling_footholds(&posed(0.0), &terrain, 0.02).is_empty());
    }
}
