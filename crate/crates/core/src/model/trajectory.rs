//! Knot-indexed motion plans and the contact schedules that shape them.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing interval endpoints with knot times.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Stance,
    Swing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    pub start: f64,
    pub end: f64,
    pub phase: Phase,
}

/// Per-leg ordered phase intervals partitioning `[0, final_time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSchedule {
    pub final_time: f64,
    pub legs: Vec<Vec<PhaseInterval>>,
}

impl ContactSchedule {
    pub fn new(final_time: f64, legs: Vec<Vec<PhaseInterval>>) -> Result<Self> {
        let s = ContactSchedule { final_time, legs };
        s.validate()?;
        Ok(s)
    }

    /// Every leg in stance for the whole horizon.
    pub fn all_stance(legs: usize, final_time: f64) -> Result<Self> {
        Self::new(final_time, vec![vec![PhaseInterval { start: 0.0, end: final_time, phase: Phase::Stance }]; legs])
    }

    /// Crawl with one leg in the air at a time.
    ///
    /// Each cycle is split into one slot per leg, visited in `order`; the swing
    /// window of `swing_duration` is centred in its slot and snapped to the
    /// knot grid of spacing `dt`.
    pub fn crawl(legs: usize, order: &[usize], cycles: usize, final_time: f64, swing_duration: f64, dt: f64) -> Result<Self> {
        if order.len() != legs || (0..legs).any(|i| !order.contains(&i)) {
            return Err(Error::InfeasibleSchedule("crawl order must list every leg once".into()));
        }
        if cycles == 0 || !(final_time > 0.0) || !(dt > 0.0) {
            return Err(Error::InfeasibleSchedule("crawl needs cycles ≥ 1, T_f > 0 and dt > 0".into()));
        }
        let slot = final_time / (cycles * legs) as f64;
        if !(swing_duration > 0.0 && swing_duration <= slot + TIME_EPS) {
            return Err(Error::InfeasibleSchedule(format!("swing duration {swing_duration} s does not fit a {slot} s slot")));
        }
        let snap = |t: f64| ((t / dt).round() * dt).clamp(0.0, final_time);
        let mut swings: Vec<Vec<(f64, f64)>> = vec![Vec::new(); legs];
        for c in 0..cycles {
            for (j, &leg) in order.iter().enumerate() {
                let centre = (c * legs + j) as f64 * slot + 0.5 * slot;
                let (a, b) = (snap(centre - 0.5 * swing_duration), snap(centre + 0.5 * swing_duration));
                if b - a < dt - TIME_EPS {
                    return Err(Error::InfeasibleSchedule(format!("swing of leg {leg} in cycle {c} collapses on the knot grid")));
                }
                swings[leg].push((a, b));
            }
        }
        let intervals = swings
            .into_iter()
            .map(|sw| {
                let mut out = Vec::new();
                let mut t = 0.0;
                for (a, b) in sw {
                    if a > t + TIME_EPS {
                        out.push(PhaseInterval { start: t, end: a, phase: Phase::Stance });
                    }
                    out.push(PhaseInterval { start: a, end: b, phase: Phase::Swing });
                    t = b;
                }
                if t < final_time - TIME_EPS {
                    out.push(PhaseInterval { start: t, end: final_time, phase: Phase::Stance });
                }
                out
            })
            .collect();
        Self::new(final_time, intervals)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > 0.0) {
            return Err(Error::InfeasibleSchedule("final time must be positive".into()));
        }
        for (i, leg) in self.legs.iter().enumerate() {
            let mut t = 0.0;
            for iv in leg {
                if (iv.start - t).abs() > TIME_EPS || !(iv.end > iv.start) {
                    return Err(Error::InfeasibleSchedule(format!("leg {i}: intervals leave a gap or overlap at t = {t}")));
                }
                t = iv.end;
            }
            if (t - self.final_time).abs() > TIME_EPS {
                return Err(Error::InfeasibleSchedule(format!("leg {i}: intervals end at {t}, not at T_f = {}", self.final_time)));
            }
        }
        Ok(())
    }

    pub fn leg_count(&self) -> usize {
        self.legs.len()
    }

    /// Phase of `leg` at time `t`. Only times strictly inside a swing window
    /// count as swing; lift-off and touch-down instants are stance.
    pub fn phase_at(&self, leg: usize, t: f64) -> Phase {
        let inside = self.legs[leg]
            .iter()
            .any(|iv| iv.phase == Phase::Swing && t > iv.start + TIME_EPS && t < iv.end - TIME_EPS);
        if inside {
            Phase::Swing
        } else {
            Phase::Stance
        }
    }

    /// Knot count of the grid with spacing `dt`.
    pub fn knot_count(&self, dt: f64) -> Result<usize> {
        let n = self.final_time / dt;
        if !(dt > 0.0) || (n - n.round()).abs() > 1e-6 {
            return Err(Error::InfeasibleSchedule(format!("T_f = {} is not a multiple of dt = {dt}", self.final_time)));
        }
        Ok(n.round() as usize + 1)
    }

    /// Phase per leg per knot. Fails if a stance interval holds fewer than two knots.
    pub fn knot_phases(&self, dt: f64) -> Result<Vec<Vec<Phase>>> {
        let n = self.knot_count(dt)?;
        for (i, leg) in self.legs.iter().enumerate() {
            for iv in leg.iter().filter(|iv| iv.phase == Phase::Stance) {
                let knots = (0..n).filter(|k| {
                    let t = *k as f64 * dt;
                    t >= iv.start - TIME_EPS && t <= iv.end + TIME_EPS
                });
                if knots.count() < 2 {
                    return Err(Error::InfeasibleSchedule(format!(
                        "leg {i}: stance interval [{}, {}] covers fewer than 2 knots",
                        iv.start, iv.end
                    )));
                }
            }
        }
        Ok((0..self.leg_count()).map(|i| (0..n).map(|k| self.phase_at(i, k as f64 * dt)).collect()).collect())
    }
}

/// State at one knot.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotState {
    pub r: Vector3<f64>,
    pub rd: Vector3<f64>,
    /// `[roll, pitch, yaw]`.
    pub theta: Vector3<f64>,
    /// World-frame angular velocity.
    pub omega: Vector3<f64>,
    /// World-frame foot positions, one per leg.
    pub feet: Vec<Vector3<f64>>,
    /// Contact forces, one per leg; zero in swing.
    pub forces: Vec<Vector3<f64>>,
}

impl KnotState {
    pub fn at_rest(r: Vector3<f64>, theta: Vector3<f64>, legs: usize) -> Self {
        KnotState {
            r,
            rd: Vector3::zeros(),
            theta,
            omega: Vector3::zeros(),
            feet: vec![Vector3::zeros(); legs],
            forces: vec![Vector3::zeros(); legs],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub knots: Vec<KnotState>,
    pub schedule: ContactSchedule,
}

impl Trajectory {
    pub fn new(dt: f64, knots: Vec<KnotState>, schedule: ContactSchedule) -> Result<Self> {
        let n = schedule.knot_count(dt)?;
        if knots.len() != n {
            return Err(Error::InfeasibleSchedule(format!("expected {n} knots, got {}", knots.len())));
        }
        if knots.iter().any(|k| k.feet.len() != schedule.leg_count() || k.forces.len() != schedule.leg_count()) {
            return Err(Error::InfeasibleSchedule("every knot needs one foot and one force per leg".into()));
        }
        Ok(Trajectory { dt, knots, schedule })
    }

    pub fn final_time(&self) -> f64 {
        self.dt * (self.knots.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    pub fn in_stance(&self, k: usize, leg: usize) -> bool {
        self.schedule.phase_at(leg, self.time(k)) == Phase::Stance
    }
}

/// Default crawl order LH, LF, RH, RF for legs stored as LF, RF, LH, RH.
pub const CRAWL_ORDER: [usize; 4] = [2, 0, 3, 1];
