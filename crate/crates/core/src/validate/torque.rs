//! Joint-torque reconstruction from a planned trajectory.
//!
//! Each leg is replayed as a fixed-base chain in the trunk frame: joint
//! angles come from inverse kinematics of the foot path, rates from finite
//! differences over the knots, and the leg inertia is lumped into point
//! masses at the knee and the foot. Trunk accelerations are not fed back
//! into the legs.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use super::leg::{KneeDirection, PlanarLeg};
use crate::error::{Error, Result};
use crate::model::rotation::rotation;
use crate::model::{RobotModel, Trajectory, GRAVITY};

/// Relative overshoot of a torque limit still counted as a minor violation.
pub const MINOR_VIOLATION: f64 = 0.05;

pub const JOINT_NAMES: [&str; 3] = ["HAA", "HFE", "KFE"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTorque {
    pub leg: usize,
    /// `<leg>_<joint>`, e.g. `LH_HFE`.
    pub name: String,
    pub limit: f64,
    pub max_abs: f64,
    /// Fraction of knots at which `|τ|` exceeds the limit.
    pub violation_fraction: f64,
    pub series: Vec<f64>,
}

impl JointTorque {
    /// `max |τ| / limit`.
    pub fn peak_ratio(&self) -> f64 {
        self.max_abs / self.limit
    }

    pub fn exceeds_limit(&self) -> bool {
        self.max_abs > self.limit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorqueReport {
    pub times: Vec<f64>,
    /// Three joints per leg, legs in model order.
    pub joints: Vec<JointTorque>,
}

impl TorqueReport {
    pub fn violating(&self) -> impl Iterator<Item = &JointTorque> {
        self.joints.iter().filter(|j| j.exceeds_limit())
    }

    pub fn worst(&self) -> Option<&JointTorque> {
        self.joints.iter().max_by(|a, b| a.peak_ratio().total_cmp(&b.peak_ratio()))
    }

    /// True when every joint stays within its limit plus the minor-violation margin.
    pub fn within_margin(&self) -> bool {
        self.joints.iter().all(|j| j.peak_ratio() <= 1.0 + MINOR_VIOLATION)
    }
}

/// Leg equation of motion with point masses `(mass, body)` where body 0 is
/// the knee and body 1 the foot.
struct LegDynamics<'a> {
    leg: &'a PlanarLeg,
    masses: [f64; 2],
}

impl LegDynamics<'_> {
    fn jacobian(&self, body: usize, q: &DVector<f64>) -> DMatrix<f64> {
        if body == 0 {
            self.leg.knee_jacobian(q)
        } else {
            self.leg.jacobian(q)
        }
    }

    /// `M q̈ + c + g − Jᵀ f` with gravity `g_base` and foot force `f_base`
    /// expressed in the trunk frame.
    fn torque(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        g_base: &Vector3<f64>,
        f_base: &Vector3<f64>,
    ) -> DVector<f64> {
        let eps = 1e-6;
        let mut tau = -self.leg.jacobian(q).transpose() * DVector::from_column_slice(f_base.as_slice());
        for (body, &m) in self.masses.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let j = self.jacobian(body, q);
            // J̇ q̇ along the current joint velocity
            let jd_qd = (self.jacobian(body, &(q + qd * eps)) - self.jacobian(body, &(q - qd * eps))) / (2.0 * eps) * qd;
            let accel = &j * qdd + jd_qd - DVector::from_column_slice(g_base.as_slice());
            tau += j.transpose() * accel * m;
        }
        tau
    }
}

fn branch_sign(knee: KneeDirection) -> f64 {
    match knee {
        KneeDirection::Forward => -1.0,
        KneeDirection::Backward => 1.0,
    }
}

/// Replays every leg through inverse kinematics and its equation of motion.
///
/// Rates use central differences at interior knots. The end knots take the
/// one-sided velocity and the acceleration of their neighbour.
pub fn torque_replay(trajectory: &Trajectory, model: &RobotModel) -> Result<TorqueReport> {
    let n = trajectory.knots.len();
    let legs = model.leg_count();
    if trajectory.knots.iter().any(|s| s.feet.len() != legs) {
        return Err(Error::InvalidModel(format!("trajectory does not have {legs} legs")));
    }
    let dt = trajectory.dt;
    let rot: Vec<Matrix3<f64>> = trajectory.knots.iter().map(|s| rotation(&s.theta)).collect();

    let per_leg: Vec<Vec<DVector<f64>>> = (0..legs)
        .into_par_iter()
        .map(|i| {
            let leg = model.spatial_leg(i);
            let sign = branch_sign(model.legs[i].knee);
            let q: Vec<DVector<f64>> = (0..n)
                .map(|k| {
                    let s = &trajectory.knots[k];
                    let p = rot[k].transpose() * (s.feet[i] - s.r);
                    let q = leg.ik(&p)?;
                    if q[2] * sign < -1e-12 {
                        return Err(Error::BranchFlip { leg: i, knot: k });
                    }
                    Ok(q)
                })
                .collect::<Result<_>>()?;
            let qd: Vec<DVector<f64>> = (0..n)
                .map(|k| match k {
                    _ if n < 2 => DVector::zeros(3),
                    0 => (&q[1] - &q[0]) / dt,
                    k if k == n - 1 => (&q[k] - &q[k - 1]) / dt,
                    k => (&q[k + 1] - &q[k - 1]) / (2.0 * dt),
                })
                .collect();
            let second = |k: usize| (&q[k + 1] - &q[k] * 2.0 + &q[k - 1]) / (dt * dt);
            let qdd: Vec<DVector<f64>> = (0..n)
                .map(|k| match k {
                    _ if n < 3 => DVector::zeros(3),
                    0 => second(1),
                    k if k == n - 1 => second(n - 2),
                    k => second(k),
                })
                .collect();
            let dynamics = LegDynamics { leg: &leg, masses: [model.knee_mass, model.foot_mass] };
            Ok((0..n)
                .map(|k| {
                    let rt = rot[k].transpose();
                    let g_base = rt * Vector3::new(0.0, 0.0, -GRAVITY);
                    let f_base = rt * trajectory.knots[k].forces[i];
                    dynamics.torque(&q[k], &qd[k], &qdd[k], &g_base, &f_base)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut joints = Vec::with_capacity(3 * legs);
    for (i, taus) in per_leg.iter().enumerate() {
        for (j, joint) in JOINT_NAMES.iter().enumerate() {
            let series: Vec<f64> = taus.iter().map(|t| t[j]).collect();
            let limit = model.legs[i].torque_limits[j];
            let max_abs = series.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            let over = series.iter().filter(|t| t.abs() > limit).count();
            joints.push(JointTorque {
                leg: i,
                name: format!("{}_{joint}", model.legs[i].name),
                limit,
                max_abs,
                violation_fraction: if n == 0 { 0.0 } else { over as f64 / n as f64 },
                series,
            });
        }
    }
    Ok(TorqueReport { times: (0..n).map(|k| trajectory.time(k)).collect(), joints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContactSchedule, KnotState};
    use proptest::prelude::*;

    fn stand(model: &RobotModel, r: Vector3<f64>, theta: Vector3<f64>, knots: usize) -> Trajectory {
        let legs = model.leg_count();
        let rot = rotation(&theta);
        let mut s = KnotState::at_rest(r, theta, legs);
        for i in 0..legs {
            s.feet[i] = r + rot * model.legs[i].nominal_foot;
            s.forces[i] = Vector3::new(0.0, 0.0, model.weight() / legs as f64);
        }
        let schedule = ContactSchedule::all_stance(legs, 0.1 * (knots - 1) as f64).unwrap();
        Trajectory::new(0.1, vec![s; knots], schedule).unwrap()
    }

    /// Statics by virtual work: `τ = ∂V/∂q − (∂p/∂q)ᵀ f`, every derivative by
    /// central differences of the forward kinematics.
    fn statics_oracle(leg: &PlanarLeg, q: &DVector<f64>, g: &Vector3<f64>, f: &Vector3<f64>, masses: [f64; 2]) -> DVector<f64> {
        let h = 1e-6;
        let work = |q: &DVector<f64>| {
            let potential = -(masses[0] * g.dot(&leg.knee_position(q)) + masses[1] * g.dot(&leg.fk(q)));
            potential - f.dot(&leg.fk(q))
        };
        DVector::from_fn(q.len(), |c, _| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[c] += h;
            qm[c] -= h;
            (work(&qp) - work(&qm)) / (2.0 * h)
        })
    }

    #[test]
    fn static_stand_matches_statics() {
        let model = RobotModel::hyq_like();
        let traj = stand(&model, Vector3::new(0.0, 0.0, 0.55), Vector3::zeros(), 5);
        let report = torque_replay(&traj, &model).unwrap();
        let g = Vector3::new(0.0, 0.0, -GRAVITY);
        for i in 0..model.leg_count() {
            let leg = model.spatial_leg(i);
            let q = leg.ik(&model.legs[i].nominal_foot).unwrap();
            let expect = statics_oracle(&leg, &q, &g, &traj.knots[0].forces[i], [model.knee_mass, model.foot_mass]);
            for j in 0..3 {
                let joint = &report.joints[3 * i + j];
                for &t in &joint.series {
                    assert!((t - expect[j]).abs() < 1e-5, "{}: {t} vs {}", joint.name, expect[j]);
                }
                assert!(joint.max_abs < joint.limit);
            }
        }
        assert!(report.within_margin());
        assert_eq!(report.violating().count(), 0);
    }

    #[test]
    fn unloaded_slow_leg_feels_gravity_only() {
        let model = RobotModel::hyq_like();
        let mut traj = stand(&model, Vector3::new(0.0, 0.0, 0.55), Vector3::zeros(), 11);
        for (k, s) in traj.knots.iter_mut().enumerate() {
            s.forces[0] = Vector3::zeros();
            s.feet[0].z += 0.002 * k as f64;
        }
        let report = torque_replay(&traj, &model).unwrap();
        let leg = model.spatial_leg(0);
        let g = Vector3::new(0.0, 0.0, -GRAVITY);
        for k in 0..11 {
            let q = leg.ik(&(traj.knots[k].feet[0] - traj.knots[k].r)).unwrap();
            let expect = statics_oracle(&leg, &q, &g, &Vector3::zeros(), [model.knee_mass, model.foot_mass]);
            for j in 0..3 {
                let t = report.joints[j].series[k];
                assert!((t - expect[j]).abs() < 1e-3, "knot {k} joint {j}: {t} vs {}", expect[j]);
                assert!(t.abs() < 5.0);
            }
        }
    }

    #[test]
    fn overloaded_leg_is_reported() {
        let model = RobotModel::hyq_like();
        let mut traj = stand(&model, Vector3::new(0.0, 0.0, 0.55), Vector3::zeros(), 5);
        traj.knots[2].forces[2] = Vector3::new(600.0, 0.0, 900.0);
        let report = torque_replay(&traj, &model).unwrap();
        let bad: Vec<_> = report.violating().map(|j| j.name.as_str()).collect();
        assert!(bad.iter().all(|n| n.starts_with("LH")) && !bad.is_empty(), "{bad:?}");
        let worst = report.worst().unwrap();
        assert!((worst.violation_fraction - 0.2).abs() < 1e-12);
        assert!(!report.within_margin());
    }

    #[test]
    fn unreachable_foot_propagates() {
        let model = RobotModel::hyq_like();
        let mut traj = stand(&model, Vector3::new(0.0, 0.0, 0.55), Vector3::zeros(), 3);
        traj.knots[1].feet[1].z -= 0.5;
        assert!(matches!(torque_replay(&traj, &model), Err(Error::Unreachable { .. })));
    }

    proptest! {
        #[test]
        fn constant_trajectory_is_pure_statics(
            roll in -0.2f64..0.2, pitch in -0.2f64..0.2, yaw in -3.0f64..3.0,
            fx in -100.0f64..100.0, fy in -50.0f64..50.0, fz in 0.0f64..400.0,
        ) {
            let model = RobotModel::hyq_like();
            let theta = Vector3::new(roll, pitch, yaw);
            let mut traj = stand(&model, Vector3::new(0.3, -0.2, 0.6), theta, 4);
            let f = Vector3::new(fx, fy, fz);
            for s in &mut traj.knots {
                s.forces[3] = f;
            }
            let report = torque_replay(&traj, &model).unwrap();
            let rt = rotation(&theta).transpose();
            let leg = model.spatial_leg(3);
            let q = leg.ik(&model.legs[3].nominal_foot).unwrap();
            let expect = statics_oracle(&leg, &q, &(rt * Vector3::new(0.0, 0.0, -GRAVITY)), &(rt * f), [model.knee_mass, model.foot_mass]);
            for j in 0..3 {
                for &t in &report.joints[9 + j].series {
                    prop_assert!((t - expect[j]).abs() < 1e-5 * (1.0 + expect[j].abs()));
                }
            }
        }
    }
}
