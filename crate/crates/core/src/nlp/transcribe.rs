//! Direct transcription of a locomotion task into an [`NlpProblem`].

use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::elements::*;
use super::init::initial_guess;
use super::layout::{VariableLayout, BASE_DIM};
use super::problem::{NlpProblem, ObjectiveTerm};
use crate::constraints::block::{BlockKind, ConstraintBlock, ConstraintFn};
use crate::constraints::residuals::friction_cone_bounds;
use crate::error::{Error, Result};
use crate::model::{ContactSchedule, RobotModel, TerrainModel};

/// Half width of the band the foot-radius residual is held in, m.
const FOOT_RADIUS_BAND: f64 = 1e-3;
/// Added to the foot radius in the planner so that a foothold accepted on the
/// smoothed terrain stays clear of the sharp edge.
const FOOT_RADIUS_MARGIN: f64 = 2e-3;
/// Largest foothold move per solver iteration, m. Terrain features are only
/// a few centimetres wide, so longer steps jump across them.
const FOOT_STEP_LIMIT: f64 = 0.05;

/// Knot spacing of the transcription, s.
pub const DEFAULT_DT: f64 = 0.1;

/// CoM position and `[roll, pitch, yaw]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub position: [f64; 3],
    pub orientation: [f64; 3],
}

impl BasePose {
    pub fn new(position: [f64; 3], orientation: [f64; 3]) -> Self {
        BasePose { position, orientation }
    }

    pub fn r(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub fn theta(&self) -> Vector3<f64> {
        Vector3::from(self.orientation)
    }
}

/// Move from `start` to `goal` in `final_time`, at rest at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub start: BasePose,
    pub goal: BasePose,
    pub final_time: f64,
    pub dt: f64,
}

/// Which constraint families are attached, plus the regulariser weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOptions {
    pub polytope: bool,
    pub shin: bool,
    pub foot_radius: bool,
    pub regularizer_weight: f64,
    pub n_probe: usize,
    /// Interpolation points per knot interval at which swinging feet (and
    /// shins, when checked) must clear the terrain; 1 checks knots only.
    pub substeps: usize,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions { polytope: true, shin: true, foot_radius: true, regularizer_weight: 1e-3, n_probe: 2, substeps: 4 }
    }
}

fn idx(parts: &[&[usize]]) -> Vec<usize> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Builds the transcription: dynamics defects between knots, boundary
/// conditions, and per knot and leg the kinematic, terrain, friction,
/// polytope, foot-radius and shin blocks selected by `options`.
pub fn transcribe(model: &RobotModel, terrain: &TerrainModel, schedule: &ContactSchedule, task: &Task, options: &ProblemOptions) -> Result<NlpProblem> {
    terrain.validate()?;
    if schedule.leg_count() != model.leg_count() {
        return Err(Error::InfeasibleSchedule(format!(
            "schedule has {} legs, robot has {}",
            schedule.leg_count(),
            model.leg_count()
        )));
    }
    if !(task.final_time > 0.0) || (schedule.final_time - task.final_time).abs() > 1e-9 {
        return Err(Error::InfeasibleSchedule(format!(
            "task final time {} does not match the schedule ({})",
            task.final_time, schedule.final_time
        )));
    }
    let layout = VariableLayout::new(schedule, task.dt)?;
    let dt = task.dt;
    let n_knots = layout.knots();
    let legs = model.leg_count();
    let terrain_arc = Arc::new(terrain.clone());
    let weight = model.weight();

    let mut blocks = Vec::new();
    let eq = |kind, k: usize, leg: Option<usize>, vars: Vec<usize>, f: Arc<dyn ConstraintFn>| ConstraintBlock::equality(kind, Some(k), leg, vars, f);

    for (k, pose) in [(0, &task.start), (n_knots - 1, &task.goal)] {
        let mut target = [0.0; BASE_DIM];
        target[..3].copy_from_slice(&pose.position);
        target[6..9].copy_from_slice(&pose.orientation);
        let vars = idx(&[&layout.r(k), &layout.rd(k), &layout.theta(k), &layout.omega(k)]);
        blocks.push(eq(BlockKind::Boundary, k, None, vars, Arc::new(Boundary { target })));
    }

    for k in 0..n_knots {
        let stance: Vec<usize> = (0..legs).filter(|&i| layout.stance(k, i)).collect();
        if k + 1 < n_knots {
            blocks.push(eq(
                BlockKind::PositionDefect,
                k,
                None,
                idx(&[&layout.r(k), &layout.rd(k), &layout.r(k + 1)]),
                Arc::new(PositionDefect { dt }),
            ));
            let mut lin = idx(&[&layout.rd(k), &layout.rd(k + 1)]);
            for &i in &stance {
                lin.extend(layout.force(k, i).unwrap());
            }
            blocks.push(eq(BlockKind::LinearDynamics, k, None, lin, Arc::new(LinearDynamics { mass: model.mass, dt, forces: stance.len() })));
            blocks.push(eq(
                BlockKind::EulerDefect,
                k,
                None,
                idx(&[&layout.theta(k), &layout.theta(k + 1), &layout.omega(k)]),
                Arc::new(EulerDefect { dt }),
            ));
            let mut ang = idx(&[&layout.r(k), &layout.theta(k), &layout.omega(k), &layout.omega(k + 1)]);
            for &i in &stance {
                ang.extend(layout.foot(k, i));
                ang.extend(layout.force(k, i).unwrap());
            }
            blocks.push(eq(
                BlockKind::AngularDynamics,
                k,
                None,
                ang,
                Arc::new(AngularDynamics { inertia: model.inertia, dt, contacts: stance.len() }),
            ));
        }

        for i in 0..legs {
            let leg = &model.legs[i];
            let foot = layout.foot(k, i);
            let b = model.box_half_edge;
            blocks.push(ConstraintBlock::new(
                BlockKind::KinematicBox,
                Some(k),
                Some(i),
                idx(&[&layout.r(k), &layout.theta(k), &foot]),
                vec![-b; 3],
                vec![b; 3],
                Arc::new(KinematicBox { nominal: leg.nominal_foot }),
            ));
            if let Some(force) = layout.force(k, i) {
                blocks.push(eq(BlockKind::StanceTerrain, k, Some(i), foot.to_vec(), Arc::new(TerrainGap { terrain: terrain_arc.clone(), offset: 0.0 })));
                if k + 1 < n_knots && layout.stance(k + 1, i) {
                    let next = layout.foot(k + 1, i);
                    blocks.push(eq(BlockKind::NoSlip, k, Some(i), vec![foot[0], foot[1], next[0], next[1]], Arc::new(NoSlip)));
                }
                let (lo, hi) = friction_cone_bounds(terrain);
                blocks.push(ConstraintBlock::new(
                    BlockKind::FrictionCone,
                    Some(k),
                    Some(i),
                    idx(&[&foot, &force]),
                    lo.to_vec(),
                    hi.to_vec(),
                    Arc::new(FrictionCone { terrain: terrain_arc.clone() }),
                ));
                if options.polytope {
                    let facets = leg.polytopes.facet_count();
                    let mut lo = vec![f64::NEG_INFINITY; facets];
                    let mut hi = vec![0.0; facets];
                    lo.push(-leg.lateral_force_limit);
                    hi.push(leg.lateral_force_limit);
                    blocks.push(ConstraintBlock::new(
                        BlockKind::ForcePolytope,
                        Some(k),
                        Some(i),
                        idx(&[&layout.r(k), &layout.theta(k), &foot, &force]),
                        lo,
                        hi,
                        Arc::new(ForcePolytope { leg: leg.clone() }),
                    ));
                }
                if options.foot_radius && model.foot_radius > 0.0 {
                    blocks.push(ConstraintBlock::new(
                        BlockKind::FootRadius,
                        Some(k),
                        Some(i),
                        idx(&[&layout.theta(k), &foot]),
                        vec![-FOOT_RADIUS_BAND; 2],
                        vec![FOOT_RADIUS_BAND; 2],
                        Arc::new(FootRadius { terrain: terrain_arc.clone(), radius: model.foot_radius + FOOT_RADIUS_MARGIN }),
                    ));
                }
            } else {
                blocks.push(ConstraintBlock::new(
                    BlockKind::SwingClearance,
                    Some(k),
                    Some(i),
                    foot.to_vec(),
                    vec![0.0],
                    vec![f64::INFINITY],
                    Arc::new(TerrainGap { terrain: terrain_arc.clone(), offset: terrain.min_clearance }),
                ));
            }
            if options.shin {
                let rows = options.n_probe + 1;
                blocks.push(ConstraintBlock::new(
                    BlockKind::ShinClearance,
                    Some(k),
                    Some(i),
                    idx(&[&layout.theta(k), &foot]),
                    vec![0.0; rows],
                    vec![f64::INFINITY; rows],
                    Arc::new(ShinClearance {
                        terrain: terrain_arc.clone(),
                        shin_length: model.shin_length,
                        shin_angle: leg.shin_angle,
                        n_probe: options.n_probe,
                    }),
                ));
            }
            if options.substeps > 1 && k + 1 < n_knots && !(layout.stance(k, i) && layout.stance(k + 1, i)) {
                let func = SegmentClearance {
                    terrain: terrain_arc.clone(),
                    fractions: (1..options.substeps).map(|j| j as f64 / options.substeps as f64).collect(),
                    shin: options.shin.then_some((model.shin_length, leg.shin_angle, options.n_probe)),
                };
                let rows = func.dim();
                blocks.push(ConstraintBlock::new(
                    BlockKind::SegmentClearance,
                    Some(k),
                    Some(i),
                    idx(&[&layout.theta(k)[2..], &foot, &layout.theta(k + 1)[2..], &layout.foot(k + 1, i)]),
                    vec![0.0; rows],
                    vec![f64::INFINITY; rows],
                    Arc::new(func),
                ));
            }
        }
    }

    let mut objective = Vec::new();
    if options.regularizer_weight > 0.0 {
        let w = options.regularizer_weight;
        for k in 0..n_knots {
            let n_stance = layout.stance_count(k);
            for i in 0..legs {
                if let Some(force) = layout.force(k, i) {
                    objective.push(ObjectiveTerm {
                        vars: force.to_vec(),
                        weight: w,
                        func: Arc::new(ForceDeviation { target: weight / n_stance as f64, scale: weight }),
                    });
                }
                if k + 1 < n_knots {
                    objective.push(ObjectiveTerm {
                        vars: idx(&[&layout.r(k), &layout.theta(k), &layout.foot(k, i), &layout.r(k + 1), &layout.theta(k + 1), &layout.foot(k + 1, i)]),
                        weight: w,
                        func: Arc::new(FootVelocity { dt }),
                    });
                }
            }
        }
    }

    let guess = initial_guess(model, terrain, schedule, task, &layout, options)?;
    let x0 = layout.pack(&guess)?;
    let mut var_scale = DVector::from_element(layout.len(), 1.0);
    for j in layout.force_indices() {
        var_scale[j] = weight / legs as f64;
    }
    let leg_names = model.legs.iter().map(|l| l.name.clone()).collect();
    let mut problem = NlpProblem::new(layout, schedule.clone(), blocks, objective, x0, var_scale, leg_names);
    for k in 0..n_knots {
        for i in 0..legs {
            for j in problem.layout.foot(k, i) {
                problem.step_limit[j] = FOOT_STEP_LIMIT;
            }
        }
    }
    Ok(problem)
}
