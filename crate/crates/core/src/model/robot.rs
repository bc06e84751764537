//! Robot description: trunk inertia, leg geometry and per-leg force polytopes.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::PredefinedPolytopes;
use crate::validate::leg::{KneeDirection, LegDof, PlanarLeg};

pub const GRAVITY: f64 = 9.81;

/// Serializable leg description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegParams {
    pub name: String,
    /// Hip (HAA/HFE) joint position in the base frame, m.
    pub hip: [f64; 3],
    /// Centre of the kinematic box in the base frame, m.
    pub nominal_foot: [f64; 3],
    /// HAA, HFE, KFE limits, N·m.
    pub torque_limits: [f64; 3],
    pub knee: KneeDirection,
    /// Shin angle β from the horizontal, degrees.
    pub shin_angle_deg: f64,
}

/// Serializable robot description; see [`RobotParams::hyq_like`] for defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    pub mass: f64,
    /// Body-frame inertia tensor, row-major, kg·m².
    pub inertia: [[f64; 3]; 3],
    pub upper_link: f64,
    pub lower_link: f64,
    pub box_half_edge: f64,
    pub shin_length: f64,
    pub foot_radius: f64,
    /// Point masses lumped at each knee and foot for torque replay, kg.
    pub knee_mass: f64,
    pub foot_mass: f64,
    /// Override for the reference distances `[l1, l2, l3]`; derived from the
    /// nominal foot and the box when absent.
    #[serde(default)]
    pub polytope_distances: Option<[f64; 3]>,
    pub legs: Vec<LegParams>,
}

impl RobotParams {
    /// A HyQ-like quadruped, legs ordered LF, RF, LH, RH. Front knees point
    /// backward and hind knees forward.
    pub fn hyq_like() -> Self {
        let leg = |name: &str, x: f64, y: f64, front: bool| LegParams {
            name: name.into(),
            hip: [x, y, 0.0],
            nominal_foot: [x, y, -0.5],
            torque_limits: [120.0, 150.0, 150.0],
            knee: if front { KneeDirection::Backward } else { KneeDirection::Forward },
            shin_angle_deg: if front { 127.0 } else { 37.0 },
        };
        RobotParams {
            mass: 85.0,
            inertia: [[4.26, 0.0, 0.0], [0.0, 8.97, 0.0], [0.0, 0.0, 9.88]],
            upper_link: 0.35,
            lower_link: 0.33,
            box_half_edge: 0.15,
            shin_length: 0.3,
            foot_radius: 0.02,
            knee_mass: 0.9,
            foot_mass: 0.3,
            polytope_distances: None,
            legs: vec![
                leg("LF", 0.3735, 0.207, true),
                leg("RF", 0.3735, -0.207, true),
                leg("LH", -0.3735, 0.207, false),
                leg("RH", -0.3735, -0.207, false),
            ],
        }
    }
}

/// One leg with its precomputed sagittal force polytopes.
#[derive(Debug, Clone, PartialEq)]
pub struct LegModel {
    pub name: String,
    pub hip: Vector3<f64>,
    pub nominal_foot: Vector3<f64>,
    pub torque_limits: [f64; 3],
    pub knee: KneeDirection,
    /// β, rad.
    pub shin_angle: f64,
    pub polytopes: PredefinedPolytopes,
    /// Bound on the lateral force component: HAA limit over nominal hip height.
    pub lateral_force_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub upper_link: f64,
    pub lower_link: f64,
    pub box_half_edge: f64,
    pub shin_length: f64,
    pub foot_radius: f64,
    pub knee_mass: f64,
    pub foot_mass: f64,
    pub legs: Vec<LegModel>,
}

impl RobotModel {
    pub fn new(params: &RobotParams) -> Result<Self> {
        let p = params;
        let bad = |m: &str| Err(Error::InvalidModel(m.into()));
        if !(p.mass > 0.0) {
            return bad("mass must be positive");
        }
        let inertia = Matrix3::from_fn(|r, c| p.inertia[r][c]);
        if (inertia - inertia.transpose()).amax() > 1e-9 * inertia.amax().max(1.0) {
            return bad("inertia must be symmetric");
        }
        if SymmetricEigen::new(inertia).eigenvalues.min() <= 0.0 {
            return bad("inertia must be positive definite");
        }
        if !(p.box_half_edge > 0.0 && p.shin_length > 0.0 && p.foot_radius >= 0.0) {
            return bad("box half edge and shin length must be positive, foot radius non-negative");
        }
        if !(p.knee_mass >= 0.0 && p.foot_mass >= 0.0) {
            return bad("leg point masses must be non-negative");
        }
        if p.legs.is_empty() {
            return bad("robot needs at least one leg");
        }
        let reach = p.upper_link + p.lower_link;
        let legs = p
            .legs
            .iter()
            .map(|lp| {
                if lp.torque_limits.iter().any(|t| !(*t > 0.0)) {
                    return Err(Error::InvalidModel(format!("leg {}: torque limits must be positive", lp.name)));
                }
                let hip = Vector3::from(lp.hip);
                let nominal_foot = Vector3::from(lp.nominal_foot);
                let rel = nominal_foot - hip;
                let l2 = rel.x.hypot(rel.z);
                let distances = p.polytope_distances.unwrap_or([
                    l2 - p.box_half_edge,
                    l2,
                    (l2 + p.box_half_edge).min(0.98 * reach),
                ]);
                let sagittal = PlanarLeg::new(p.upper_link, p.lower_link, Vector3::zeros(), LegDof::Sagittal, lp.knee)?;
                let polytopes = PredefinedPolytopes::compute(&sagittal, &lp.torque_limits[1..], distances)
                    .map_err(|e| Error::PolytopePrecompute(format!("leg {}: {e}", lp.name)))?;
                let height = -rel.z;
                if !(height > 0.0) {
                    return Err(Error::InvalidModel(format!("leg {}: nominal foot must be below the hip", lp.name)));
                }
                Ok(LegModel {
                    name: lp.name.clone(),
                    hip,
                    nominal_foot,
                    torque_limits: lp.torque_limits,
                    knee: lp.knee,
                    shin_angle: lp.shin_angle_deg.to_radians(),
                    polytopes,
                    lateral_force_limit: lp.torque_limits[0] / height,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RobotModel {
            mass: p.mass,
            inertia,
            upper_link: p.upper_link,
            lower_link: p.lower_link,
            box_half_edge: p.box_half_edge,
            shin_length: p.shin_length,
            foot_radius: p.foot_radius,
            knee_mass: p.knee_mass,
            foot_mass: p.foot_mass,
            legs,
        })
    }

    pub fn hyq_like() -> Self {
        Self::new(&RobotParams::hyq_like()).expect("default robot is valid")
    }

    pub fn leg_count(&self) -> usize {
        self.legs.len()
    }

    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }

    /// Sagittal 2-DoF chain of leg `i`, hip at the origin.
    pub fn sagittal_leg(&self, i: usize) -> PlanarLeg {
        PlanarLeg::new(self.upper_link, self.lower_link, Vector3::zeros(), LegDof::Sagittal, self.legs[i].knee)
            .expect("link lengths validated")
    }

    /// Full HAA–HFE–KFE chain of leg `i` in the base frame.
    pub fn spatial_leg(&self, i: usize) -> PlanarLeg {
        PlanarLeg::new(self.upper_link, self.lower_link, self.legs[i].hip, LegDof::WithAbduction, self.legs[i].knee)
            .expect("link lengths validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_robot_builds() {
        let robot = RobotModel::hyq_like();
        assert_eq!(robot.leg_count(), 4);
        for leg in &robot.legs {
            let [l1, l2, l3] = leg.polytopes.distances;
            assert!(l1 < l2 && l2 < l3);
            assert_eq!(leg.polytopes.facet_count(), 4);
            assert!((leg.lateral_force_limit - 120.0 / 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let base = RobotParams::hyq_like();
        let mut p = base.clone();
        p.mass = 0.0;
        assert!(RobotModel::new(&p).is_err());
        let mut p = base.clone();
        p.inertia[0][1] = 1.0;
        assert!(RobotModel::new(&p).is_err());
        let mut p = base.clone();
        p.inertia[2][2] = -1.0;
        assert!(RobotModel::new(&p).is_err());
        let mut p = base.clone();
        p.legs[0].torque_limits[1] = 0.0;
        assert!(RobotModel::new(&p).is_err());
        let mut p = base.clone();
        p.box_half_edge = 0.0;
        assert!(RobotModel::new(&p).is_err());
        let mut p = base;
        p.polytope_distances = Some([0.5, 0.5, 0.6]);
        assert!(matches!(RobotModel::new(&p), Err(Error::PolytopePrecompute(_))));
    }
}
