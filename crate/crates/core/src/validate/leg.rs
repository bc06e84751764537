//! Serial leg kinematics: forward/inverse kinematics and the foot Jacobian.
//!
//! Joint zero is the straight-down leg. The sagittal chain (HFE, KFE) moves the
//! foot in the x–z plane of the hip; the optional HAA joint rotates that plane
//! about the base x axis.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of the hip–foot line the knee sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KneeDirection {
    /// Knee ahead (+x) of the hip–foot line, knee angle negative.
    Forward,
    /// Knee behind the hip–foot line, knee angle positive.
    Backward,
}

impl KneeDirection {
    fn sign(self) -> f64 {
        match self {
            KneeDirection::Forward => -1.0,
            KneeDirection::Backward => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegDof {
    /// HFE + KFE, planar in x–z.
    Sagittal,
    /// HAA + HFE + KFE.
    WithAbduction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarLeg {
    pub upper: f64,
    pub lower: f64,
    /// Hip joint position in the base frame.
    pub hip: Vector3<f64>,
    pub joint_limits: Vec<(f64, f64)>,
    pub dof: LegDof,
    pub knee: KneeDirection,
}

/// Tolerance on the annulus boundary for IK.
const REACH_TOL: f64 = 1e-12;

impl PlanarLeg {
    pub fn new(upper: f64, lower: f64, hip: Vector3<f64>, dof: LegDof, knee: KneeDirection) -> Result<Self> {
        if !(upper > 0.0 && lower > 0.0) {
            return Err(Error::InvalidModel("link lengths must be positive".into()));
        }
        let n = match dof {
            LegDof::Sagittal => 2,
            LegDof::WithAbduction => 3,
        };
        let pi = std::f64::consts::PI;
        Ok(PlanarLeg { upper, lower, hip, joint_limits: vec![(-pi, pi); n], dof, knee })
    }

    pub fn with_joint_limits(mut self, limits: Vec<(f64, f64)>) -> Result<Self> {
        if limits.len() != self.dof_count() || limits.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidModel("joint limits must be well-ordered, one pair per joint".into()));
        }
        self.joint_limits = limits;
        Ok(self)
    }

    pub fn dof_count(&self) -> usize {
        match self.dof {
            LegDof::Sagittal => 2,
            LegDof::WithAbduction => 3,
        }
    }

    /// Output dimension of the foot Jacobian (2 for the sagittal leg, 3 otherwise).
    pub fn task_dim(&self) -> usize {
        self.dof_count()
    }

    pub fn within_limits(&self, q: &DVector<f64>) -> bool {
        q.iter().zip(&self.joint_limits).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn split<'a>(&self, q: &'a DVector<f64>) -> (f64, f64, f64) {
        match self.dof {
            LegDof::Sagittal => (0.0, q[0], q[1]),
            LegDof::WithAbduction => (q[0], q[1], q[2]),
        }
    }

    /// Sagittal-plane foot and knee, relative to the hip, as (x, z).
    fn planar(&self, hfe: f64, kfe: f64) -> (Vector2<f64>, Vector2<f64>) {
        let knee = Vector2::new(self.upper * hfe.sin(), -self.upper * hfe.cos());
        let foot = knee + Vector2::new(self.lower * (hfe + kfe).sin(), -self.lower * (hfe + kfe).cos());
        (foot, knee)
    }

    /// Lift a sagittal point through the HAA rotation into the base frame.
    fn lift(&self, haa: f64, p: Vector2<f64>) -> Vector3<f64> {
        let (s, c) = haa.sin_cos();
        self.hip + Vector3::new(p.x, -s * p.y, c * p.y)
    }

    /// Foot position in the base frame.
    pub fn fk(&self, q: &DVector<f64>) -> Vector3<f64> {
        let (haa, hfe, kfe) = self.split(q);
        self.lift(haa, self.planar(hfe, kfe).0)
    }

    /// Knee position in the base frame.
    pub fn knee_position(&self, q: &DVector<f64>) -> Vector3<f64> {
        let (haa, hfe, kfe) = self.split(q);
        self.lift(haa, self.planar(hfe, kfe).1)
    }

    /// Closed-form IK on the leg's fixed knee branch.
    ///
    /// The sagittal leg ignores the lateral coordinate of `p_base`.
    pub fn ik(&self, p_base: &Vector3<f64>) -> Result<DVector<f64>> {
        let d = p_base - self.hip;
        let (haa, depth) = match self.dof {
            LegDof::Sagittal => (0.0, -d.z),
            LegDof::WithAbduction => (d.y.atan2(-d.z), (d.y * d.y + d.z * d.z).sqrt()),
        };
        let (x, z) = (d.x, -depth);
        let dist2 = x * x + z * z;
        let dist = dist2.sqrt();
        let (lo, hi) = ((self.upper - self.lower).abs(), self.upper + self.lower);
        if dist > hi + REACH_TOL || dist < lo - REACH_TOL || dist < 1e-12 {
            return Err(Error::Unreachable { distance: dist, min: lo, max: hi });
        }
        let cos_k = ((dist2 - self.upper * self.upper - self.lower * self.lower) / (2.0 * self.upper * self.lower)).clamp(-1.0, 1.0);
        let kfe = self.knee.sign() * cos_k.acos();
        let hfe = x.atan2(-z) - (self.lower * kfe.sin()).atan2(self.upper + self.lower * kfe.cos());
        Ok(match self.dof {
            LegDof::Sagittal => DVector::from_vec(vec![hfe, kfe]),
            LegDof::WithAbduction => DVector::from_vec(vec![haa, hfe, kfe]),
        })
    }

    /// Planar Jacobian of (x, z) with respect to (hfe, kfe).
    fn planar_jacobian(&self, hfe: f64, kfe: f64) -> [[f64; 2]; 2] {
        let (c1, s1) = (hfe.cos(), hfe.sin());
        let (c12, s12) = ((hfe + kfe).cos(), (hfe + kfe).sin());
        [
            [self.upper * c1 + self.lower * c12, self.lower * c12],
            [self.upper * s1 + self.lower * s12, self.lower * s12],
        ]
    }

    /// Analytic foot Jacobian, `ṗ = J(q) q̇`; 2×2 in (x, z) for the sagittal
    /// leg, 3×3 in (x, y, z) with abduction.
    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let (haa, hfe, kfe) = self.split(q);
        let jp = self.planar_jacobian(hfe, kfe);
        match self.dof {
            LegDof::Sagittal => DMatrix::from_row_slice(2, 2, &[jp[0][0], jp[0][1], jp[1][0], jp[1][1]]),
            LegDof::WithAbduction => {
                let (s, c) = haa.sin_cos();
                let z = self.planar(hfe, kfe).0.y;
                let mut j = DMatrix::zeros(3, 3);
                j[(1, 0)] = -c * z;
                j[(2, 0)] = -s * z;
                for col in 0..2 {
                    j[(0, col + 1)] = jp[0][col];
                    j[(1, col + 1)] = -s * jp[1][col];
                    j[(2, col + 1)] = c * jp[1][col];
                }
                j
            }
        }
    }

    /// Jacobian of the knee point, same layout as [`PlanarLeg::jacobian`].
    pub fn knee_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let (haa, hfe, _) = self.split(q);
        let (c1, s1) = (hfe.cos(), hfe.sin());
        let (jx, jz) = (self.upper * c1, self.upper * s1);
        match self.dof {
            LegDof::Sagittal => DMatrix::from_row_slice(2, 2, &[jx, 0.0, jz, 0.0]),
            LegDof::WithAbduction => {
                let (s, c) = haa.sin_cos();
                let z = -self.upper * c1;
                DMatrix::from_row_slice(3, 3, &[0.0, jx, 0.0, -c * z, -s * jz, 0.0, -s * z, c * jz, 0.0])
            }
        }
    }

    /// Foot position projected to the Jacobian's task coordinates.
    pub fn task_position(&self, q: &DVector<f64>) -> DVector<f64> {
        let p = self.fk(q);
        match self.dof {
            LegDof::Sagittal => DVector::from_vec(vec![p.x, p.z]),
            LegDof::WithAbduction => DVector::from_vec(vec![p.x, p.y, p.z]),
        }
    }
}
