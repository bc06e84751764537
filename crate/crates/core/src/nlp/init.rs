//! Initial guess for the transcription.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::layout::VariableLayout;
use super::transcribe::{ProblemOptions, Task};
use crate::constraints::residuals::{foot_radius_safety, kinematic_box_residual, shin_clearance_residual};
use crate::error::Result;
use crate::model::rotation::{euler_rate_matrix, rotation, skew};
use crate::model::{ContactSchedule, KnotState, RobotModel, TerrainModel, Trajectory, GRAVITY};

const NUDGE_STEP: f64 = 0.005;
const NUDGE_RANGE: f64 = 0.2;
const RADIUS_MARGIN: f64 = 0.01;
const SHIN_MARGIN: f64 = 0.01;
const BOX_FRACTION: f64 = 0.8;
const SWING_PEAK: f64 = 0.05;
const SWING_FLOOR: f64 = 0.02;

fn lerp(a: &Vector3<f64>, b: &Vector3<f64>, s: f64) -> Vector3<f64> {
    a + (b - a) * s
}

/// Maximal runs `[first, last]` of consecutive stance knots.
fn stance_runs(stance: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut k = 0;
    while k < stance.len() {
        if stance[k] {
            let a = k;
            while k + 1 < stance.len() && stance[k + 1] {
                k += 1;
            }
            runs.push((a, k));
        }
        k += 1;
    }
    runs
}

struct FootholdCheck<'a> {
    model: &'a RobotModel,
    terrain: &'a TerrainModel,
    options: &'a ProblemOptions,
    leg: usize,
}

impl FootholdCheck<'_> {
    /// Largest kinematic box residual over `knots`.
    fn box_reach(&self, p: &Vector3<f64>, knots: &[KnotState]) -> f64 {
        let leg = &self.model.legs[self.leg];
        knots.iter().map(|s| kinematic_box_residual(p, &s.r, &s.theta, &leg.nominal_foot).amax()).fold(0.0, f64::max)
    }

    fn accepts(&self, p: &Vector3<f64>, knots: &[KnotState]) -> bool {
        self.box_reach(p, knots) <= BOX_FRACTION * self.model.box_half_edge && self.safe(p, knots)
    }

    fn safe(&self, p: &Vector3<f64>, knots: &[KnotState]) -> bool {
        let leg = &self.model.legs[self.leg];
        knots.iter().all(|s| {
            let yaw = s.theta[2];
            let radius_ok = !self.options.foot_radius
                || foot_radius_safety(p, yaw, self.terrain, self.model.foot_radius + RADIUS_MARGIN).iter().all(|d| d.abs() < 1e-12);
            let shin_ok = !self.options.shin
                || shin_clearance_residual(p, yaw, self.terrain, self.model.shin_length, leg.shin_angle, self.options.n_probe)
                    .iter()
                    .all(|&c| c >= SHIN_MARGIN);
            radius_ok && shin_ok
        })
    }
}

/// Stance forces closest to an even split of `load` that sum to it with no
/// net moment about the base.
fn static_forces(s: &KnotState, stance: &[usize], load: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let even = load / stance.len().max(1) as f64;
    let mut a = DMatrix::zeros(6, 3 * stance.len());
    for (j, &i) in stance.iter().enumerate() {
        a.view_mut((0, 3 * j), (3, 3)).copy_from(&Matrix3::identity());
        a.view_mut((3, 3 * j), (3, 3)).copy_from(&skew(&(s.feet[i] - s.r)));
    }
    let f0 = DVector::from_iterator(3 * stance.len(), stance.iter().flat_map(|_| even.iter().copied()));
    let mut b = DVector::zeros(6);
    b.rows_mut(0, 3).copy_from(load);
    let correction = a.clone().svd(true, true).solve(&(b - &a * &f0), 1e-9).unwrap_or_else(|_| DVector::zeros(f0.len()));
    let f = f0 + correction;
    (0..stance.len()).map(|j| Vector3::new(f[3 * j], f[3 * j + 1], f[3 * j + 2])).collect()
}

/// Straight-line base motion with footholds under the nominal stance.
///
/// Each stance run is placed below the nominal foot at the run's middle knot.
/// When the foot-radius or shin blocks are on, the foothold is shifted along
/// the heading until both hold with a margin, staying inside the kinematic
/// box. Swing feet follow a straight line lifted by a triangular profile.
pub fn initial_guess(
    model: &RobotModel,
    terrain: &TerrainModel,
    schedule: &ContactSchedule,
    task: &Task,
    layout: &VariableLayout,
    options: &ProblemOptions,
) -> Result<Trajectory> {
    let n = layout.knots();
    let legs = model.leg_count();
    let (r0, r1) = (task.start.r(), task.goal.r());
    let (t0, t1) = (task.start.theta(), task.goal.theta());
    // Smooth bell-shaped speed profile, zero at both ends, integrated with
    // the same explicit Euler rule as the defect constraints.
    let bump: Vec<f64> = (0..n).map(|k| (std::f64::consts::PI * k as f64 / (n - 1) as f64).sin().powi(2)).collect();
    let total: f64 = bump[..n - 1].iter().sum();
    let mut progress = vec![0.0; n];
    for k in 1..n {
        progress[k] = progress[k - 1] + bump[k - 1] / total;
    }
    let mut knots: Vec<KnotState> = (0..n)
        .map(|k| {
            let mut st = KnotState::at_rest(lerp(&r0, &r1, progress[k]), lerp(&t0, &t1, progress[k]), legs);
            st.rd = (r1 - r0) * bump[k] / (total * task.dt);
            st
        })
        .collect();
    for k in 0..n - 1 {
        let next = knots[k + 1].theta;
        let s = &mut knots[k];
        s.omega = euler_rate_matrix(&s.theta) * (next - s.theta) / task.dt;
    }

    for i in 0..legs {
        let stance: Vec<bool> = (0..n).map(|k| layout.stance(k, i)).collect();
        let runs = stance_runs(&stance);
        let check = FootholdCheck { model, terrain, options, leg: i };
        let mut holds = Vec::with_capacity(runs.len());
        for &(a, b) in &runs {
            let mid = &knots[(a + b) / 2];
            let mut p = mid.r + rotation(&mid.theta) * model.legs[i].nominal_foot;
            p.z = terrain.height(p.x, p.y);
            if options.foot_radius || options.shin {
                let dir = Vector3::new(mid.theta[2].cos(), mid.theta[2].sin(), 0.0);
                let steps = (NUDGE_RANGE / NUDGE_STEP).round() as i32;
                let candidate = (0..=steps).flat_map(|s| [s, -s]).map(|s| {
                    let mut q = p + dir * (s as f64 * NUDGE_STEP);
                    q.z = terrain.height(q.x, q.y);
                    q
                });
                let span = &knots[a..=b];
                if let Some(q) = candidate.clone().find(|q| check.accepts(q, span)) {
                    p = q;
                } else if let Some(q) = candidate
                    .filter(|q| check.safe(q, span))
                    .min_by(|u, v| check.box_reach(u, span).total_cmp(&check.box_reach(v, span)))
                {
                    // Safe but out of reach: the solver has to move the base.
                    log::debug!("leg {}: foothold at x = {:.3} outside the box for knots {a}..={b}", model.legs[i].name, q.x);
                    p = q;
                } else {
                    log::debug!("leg {}: no safe foothold near x = {:.3} for knots {a}..={b}", model.legs[i].name, p.x);
                }
            }
            holds.push(p);
        }
        for (run, &(a, b)) in runs.iter().enumerate() {
            for s in &mut knots[a..=b] {
                s.feet[i] = holds[run];
            }
        }
        // Swing segments between runs, or before the first / after the last run.
        let mut k = 0;
        while k < n {
            if stance[k] {
                k += 1;
                continue;
            }
            let a = k;
            while k < n && !stance[k] {
                k += 1;
            }
            let b = k;
            let before = runs.iter().position(|&(_, e)| e + 1 == a).map(|r| holds[r]);
            let after = runs.iter().position(|&(s, _)| s == b).map(|r| holds[r]);
            let (pa, pb) = match (before, after) {
                (Some(x), Some(y)) => (x, y),
                (Some(x), None) => (x, x),
                (None, Some(y)) => (y, y),
                (None, None) => {
                    let p = knots[0].r + rotation(&knots[0].theta) * model.legs[i].nominal_foot;
                    (p, p)
                }
            };
            let span = (b - a + 1) as f64;
            for j in a..b {
                let u = (j + 1 - a) as f64 / span;
                let mut p = lerp(&pa, &pb, u);
                p.z += (terrain.min_clearance + SWING_PEAK) * (1.0 - (2.0 * u - 1.0).abs());
                p.z = p.z.max(terrain.height(p.x, p.y) + terrain.min_clearance + SWING_FLOOR);
                knots[j].feet[i] = p;
            }
        }
    }

    for k in 0..n {
        let accel = if k + 1 < n { (knots[k + 1].rd - knots[k].rd) / task.dt } else { Vector3::zeros() };
        let load = model.mass * (accel + Vector3::new(0.0, 0.0, GRAVITY));
        let s = &mut knots[k];
        let stance: Vec<usize> = (0..legs).filter(|&i| layout.stance(k, i)).collect();
        for (i, f) in stance.iter().zip(static_forces(s, &stance, &load)) {
            s.forces[*i] = f;
        }
    }
    Trajectory::new(task.dt, knots, schedule.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_are_maximal() {
        let s = [true, true, false, false, true, false, true];
        assert_eq!(stance_runs(&s), vec![(0, 1), (4, 4), (6, 6)]);
        assert!(stance_runs(&[false, false]).is_empty());
    }
}
