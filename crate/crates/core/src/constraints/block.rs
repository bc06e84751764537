//! Constraint blocks as consumed by the transcription and the solver.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

/// Relative step of central finite differences.
pub const FD_STEP: f64 = 1e-6;

/// Residual of one block over its local variable vector.
pub trait ConstraintFn: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, v: &[f64], out: &mut [f64]);

    /// `∂eval/∂v`, central differences unless overridden.
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        central_difference(|x, out| self.eval(x, out), v, self.dim(), jac);
    }

    /// Whether [`ConstraintFn::jacobian`] is analytic.
    fn analytic_jacobian(&self) -> bool {
        false
    }

    fn is_linear(&self) -> bool {
        false
    }

    /// The residual is not differentiable at `v` (the analytic Jacobian is one-sided).
    fn at_kink(&self, _v: &[f64]) -> bool {
        false
    }
}

/// Central differences with step `FD_STEP · max(1, |v_j|)`.
pub fn central_difference(f: impl Fn(&[f64], &mut [f64]), v: &[f64], rows: usize, jac: &mut DMatrix<f64>) {
    central_difference_cols(f, v, rows, 0..v.len(), jac);
}

/// Central differences restricted to the listed columns.
pub fn central_difference_cols(
    f: impl Fn(&[f64], &mut [f64]),
    v: &[f64],
    rows: usize,
    cols: impl IntoIterator<Item = usize>,
    jac: &mut DMatrix<f64>,
) {
    let mut x = v.to_vec();
    let (mut plus, mut minus) = (vec![0.0; rows], vec![0.0; rows]);
    for c in cols {
        let h = FD_STEP * v[c].abs().max(1.0);
        x[c] = v[c] + h;
        f(&x, &mut plus);
        x[c] = v[c] - h;
        f(&x, &mut minus);
        x[c] = v[c];
        for r in 0..rows {
            jac[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Boundary,
    PositionDefect,
    LinearDynamics,
    EulerDefect,
    AngularDynamics,
    KinematicBox,
    StanceTerrain,
    NoSlip,
    SwingClearance,
    FrictionCone,
    ForcePolytope,
    FootRadius,
    ShinClearance,
    SegmentClearance,
}

impl BlockKind {
    pub fn label(self) -> &'static str {
        match self {
            BlockKind::Boundary => "boundary",
            BlockKind::PositionDefect => "position_defect",
            BlockKind::LinearDynamics => "linear_dynamics",
            BlockKind::EulerDefect => "euler_defect",
            BlockKind::AngularDynamics => "angular_dynamics",
            BlockKind::KinematicBox => "kinematic_box",
            BlockKind::StanceTerrain => "stance_terrain",
            BlockKind::NoSlip => "no_slip",
            BlockKind::SwingClearance => "swing_clearance",
            BlockKind::FrictionCone => "friction_cone",
            BlockKind::ForcePolytope => "force_polytope",
            BlockKind::FootRadius => "foot_radius",
            BlockKind::ShinClearance => "shin_clearance",
            BlockKind::SegmentClearance => "segment_clearance",
        }
    }
}

/// A named residual with bounds over a subset of the decision vector.
#[derive(Clone)]
pub struct ConstraintBlock {
    pub kind: BlockKind,
    pub knot: Option<usize>,
    pub leg: Option<usize>,
    /// Global indices of the block's local variables, in local order.
    pub vars: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub func: Arc<dyn ConstraintFn>,
}

impl std::fmt::Debug for ConstraintBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintBlock")
            .field("kind", &self.kind)
            .field("knot", &self.knot)
            .field("leg", &self.leg)
            .field("vars", &self.vars)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl ConstraintBlock {
    pub fn new(
        kind: BlockKind,
        knot: Option<usize>,
        leg: Option<usize>,
        vars: Vec<usize>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        func: Arc<dyn ConstraintFn>,
    ) -> Self {
        assert_eq!(lower.len(), func.dim(), "{kind:?}: lower bound length");
        assert_eq!(upper.len(), func.dim(), "{kind:?}: upper bound length");
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u), "{kind:?}: lower > upper");
        ConstraintBlock { kind, knot, leg, vars, lower, upper, func }
    }

    pub fn equality(kind: BlockKind, knot: Option<usize>, leg: Option<usize>, vars: Vec<usize>, func: Arc<dyn ConstraintFn>) -> Self {
        let n = func.dim();
        Self::new(kind, knot, leg, vars, vec![0.0; n], vec![0.0; n], func)
    }

    /// Human-readable tag such as `friction_cone[k=3, leg=LH]`.
    pub fn name(&self, leg_names: &[String]) -> String {
        let mut tags = Vec::new();
        if let Some(k) = self.knot {
            tags.push(format!("k={k}"));
        }
        if let Some(i) = self.leg {
            tags.push(format!("leg={}", leg_names.get(i).cloned().unwrap_or_else(|| i.to_string())));
        }
        format!("{}[{}]", self.kind.label(), tags.join(", "))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&j| x[j]).collect()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.func.eval(&self.gather(x), &mut out);
        out
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.dim(), self.vars.len());
        self.func.jacobian(&self.gather(x), &mut jac);
        jac
    }

    /// Largest bound violation of the residual values `c`.
    pub fn violation(&self, c: &[f64]) -> f64 {
        c.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| if v.is_nan() { f64::INFINITY } else { (l - v).max(v - u).max(0.0) })
            .fold(0.0, f64::max)
    }
}
