//! Decision-vector layout.
//!
//! Knots are stored one after another. Each knot holds `r, ṙ, θ, ω` (12
//! entries), then the position of every foot (3 each), then the force of every
//! foot in stance at that knot (3 each). Swing feet carry no force variables.

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::model::{ContactSchedule, KnotState, Phase, Trajectory};

pub const BASE_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    pub dt: f64,
    /// `phases[leg][knot]`.
    pub phases: Vec<Vec<Phase>>,
    base: Vec<usize>,
    foot: Vec<Vec<usize>>,
    force: Vec<Vec<Option<usize>>>,
    len: usize,
}

impl VariableLayout {
    pub fn new(schedule: &ContactSchedule, dt: f64) -> Result<Self> {
        let phases = schedule.knot_phases(dt)?;
        let legs = phases.len();
        let knots = phases.first().map(|p| p.len()).ok_or_else(|| Error::InfeasibleSchedule("schedule has no legs".into()))?;
        let (mut base, mut foot, mut force) = (Vec::new(), Vec::new(), Vec::new());
        let mut next = 0;
        for k in 0..knots {
            base.push(next);
            next += BASE_DIM;
            foot.push((0..legs).map(|i| next + 3 * i).collect());
            next += 3 * legs;
            let mut fk = Vec::with_capacity(legs);
            for leg_phases in &phases {
                if leg_phases[k] == Phase::Stance {
                    fk.push(Some(next));
                    next += 3;
                } else {
                    fk.push(None);
                }
            }
            force.push(fk);
        }
        Ok(VariableLayout { dt, phases, base, foot, force, len: next })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn knots(&self) -> usize {
        self.base.len()
    }

    pub fn legs(&self) -> usize {
        self.phases.len()
    }

    pub fn stance(&self, k: usize, leg: usize) -> bool {
        self.phases[leg][k] == Phase::Stance
    }

    pub fn stance_count(&self, k: usize) -> usize {
        (0..self.legs()).filter(|&i| self.stance(k, i)).count()
    }

    /// Expected length: 12 per knot, 3 per foot per knot, 3 per stance foot-knot.
    pub fn expected_len(&self) -> usize {
        let stance: usize = self.phases.iter().map(|p| p.iter().filter(|x| **x == Phase::Stance).count()).sum();
        self.knots() * (BASE_DIM + 3 * self.legs()) + 3 * stance
    }

    pub fn r(&self, k: usize) -> [usize; 3] {
        let b = self.base[k];
        [b, b + 1, b + 2]
    }
    pub fn rd(&self, k: usize) -> [usize; 3] {
        let b = self.base[k] + 3;
        [b, b + 1, b + 2]
    }
    pub fn theta(&self, k: usize) -> [usize; 3] {
        let b = self.base[k] + 6;
        [b, b + 1, b + 2]
    }
    pub fn omega(&self, k: usize) -> [usize; 3] {
        let b = self.base[k] + 9;
        [b, b + 1, b + 2]
    }
    pub fn foot(&self, k: usize, leg: usize) -> [usize; 3] {
        let b = self.foot[k][leg];
        [b, b + 1, b + 2]
    }
    pub fn force(&self, k: usize, leg: usize) -> Option<[usize; 3]> {
        self.force[k][leg].map(|b| [b, b + 1, b + 2])
    }

    /// Indices of all force variables (used for variable scaling).
    pub fn force_indices(&self) -> Vec<usize> {
        self.force.iter().flatten().flatten().flat_map(|b| [*b, b + 1, b + 2]).collect()
    }

    fn read(x: &DVector<f64>, idx: [usize; 3]) -> Vector3<f64> {
        Vector3::new(x[idx[0]], x[idx[1]], x[idx[2]])
    }

    fn write(x: &mut DVector<f64>, idx: [usize; 3], v: &Vector3<f64>) {
        for (j, i) in idx.iter().enumerate() {
            x[*i] = v[j];
        }
    }

    pub fn unpack(&self, x: &DVector<f64>, schedule: &ContactSchedule) -> Result<Trajectory> {
        let knots = (0..self.knots())
            .map(|k| KnotState {
                r: Self::read(x, self.r(k)),
                rd: Self::read(x, self.rd(k)),
                theta: Self::read(x, self.theta(k)),
                omega: Self::read(x, self.omega(k)),
                feet: (0..self.legs()).map(|i| Self::read(x, self.foot(k, i))).collect(),
                forces: (0..self.legs()).map(|i| self.force(k, i).map(|f| Self::read(x, f)).unwrap_or_else(Vector3::zeros)).collect(),
            })
            .collect();
        Trajectory::new(self.dt, knots, schedule.clone())
    }

    /// Inverse of [`VariableLayout::unpack`]; swing forces are dropped.
    pub fn pack(&self, traj: &Trajectory) -> Result<DVector<f64>> {
        if traj.knots.len() != self.knots() || traj.knots.iter().any(|k| k.feet.len() != self.legs()) {
            return Err(Error::InfeasibleSchedule("trajectory does not match the variable layout".into()));
        }
        let mut x = DVector::zeros(self.len);
        for (k, s) in traj.knots.iter().enumerate() {
            Self::write(&mut x, self.r(k), &s.r);
            Self::write(&mut x, self.rd(k), &s.rd);
            Self::write(&mut x, self.theta(k), &s.theta);
            Self::write(&mut x, self.omega(k), &s.omega);
            for i in 0..self.legs() {
                Self::write(&mut x, self.foot(k, i), &s.feet[i]);
                if let Some(f) = self.force(k, i) {
                    Self::write(&mut x, f, &s.forces[i]);
                }
            }
        }
        Ok(x)
    }
}
