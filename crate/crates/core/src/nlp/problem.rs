//! The transcribed nonlinear program: variables, constraint blocks, objective.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::layout::VariableLayout;
use crate::constraints::block::{central_difference, BlockKind, ConstraintBlock, ConstraintFn};
use crate::error::Result;
use crate::model::{ContactSchedule, Trajectory};

/// Relative step of the finite-difference Lagrangian Hessian.
const HESSIAN_STEP: f64 = 1e-5;

/// Weighted least-squares term `w ‖e(v)‖²` of the objective.
#[derive(Clone)]
pub struct ObjectiveTerm {
    pub vars: Vec<usize>,
    pub weight: f64,
    pub func: Arc<dyn ConstraintFn>,
}

pub struct NlpProblem {
    pub layout: VariableLayout,
    pub schedule: ContactSchedule,
    pub blocks: Vec<ConstraintBlock>,
    pub objective: Vec<ObjectiveTerm>,
    /// Initial guess.
    pub x0: DVector<f64>,
    /// Typical magnitude of each variable, used to scale the solver's iterates.
    pub var_scale: DVector<f64>,
    /// Largest change of each variable in one solver iteration, unscaled.
    pub step_limit: DVector<f64>,
    pub leg_names: Vec<String>,
    row_offsets: Vec<usize>,
}

/// Max relative Jacobian error of one block kind.
#[derive(Debug, Clone, Serialize)]
pub struct BlockJacobianError {
    pub kind: BlockKind,
    pub blocks: usize,
    pub analytic: bool,
    pub max_rel_error: f64,
    /// Blocks evaluated at a non-differentiable point, excluded from the maximum.
    pub kinks: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobianReport {
    pub step: f64,
    pub blocks: Vec<BlockJacobianError>,
}

impl JacobianReport {
    pub fn max_error(&self, kind: BlockKind) -> Option<f64> {
        self.blocks.iter().find(|b| b.kind == kind).map(|b| b.max_rel_error)
    }
}

fn gather(vars: &[usize], x: &[f64]) -> Vec<f64> {
    vars.iter().map(|&j| x[j]).collect()
}

/// Compares an element's Jacobian with central differences of step `step`.
pub fn jacobian_error(func: &dyn ConstraintFn, v: &[f64], step: f64) -> f64 {
    let rows = func.dim();
    let mut a = DMatrix::zeros(rows, v.len());
    func.jacobian(v, &mut a);
    let mut x = v.to_vec();
    let (mut plus, mut minus) = (vec![0.0; rows], vec![0.0; rows]);
    let mut worst: f64 = 0.0;
    for c in 0..v.len() {
        let h = step * v[c].abs().max(1.0);
        x[c] = v[c] + h;
        func.eval(&x, &mut plus);
        x[c] = v[c] - h;
        func.eval(&x, &mut minus);
        x[c] = v[c];
        for r in 0..rows {
            let fd = (plus[r] - minus[r]) / (2.0 * h);
            worst = worst.max((a[(r, c)] - fd).abs() / fd.abs().max(1.0));
        }
    }
    worst
}

impl NlpProblem {
    pub fn new(
        layout: VariableLayout,
        schedule: ContactSchedule,
        blocks: Vec<ConstraintBlock>,
        objective: Vec<ObjectiveTerm>,
        x0: DVector<f64>,
        var_scale: DVector<f64>,
        leg_names: Vec<String>,
    ) -> Self {
        let mut row_offsets = Vec::with_capacity(blocks.len() + 1);
        row_offsets.push(0);
        for b in &blocks {
            row_offsets.push(row_offsets.last().unwrap() + b.dim());
        }
        let step_limit = DVector::from_element(x0.len(), f64::INFINITY);
        NlpProblem { layout, schedule, blocks, objective, x0, var_scale, step_limit, leg_names, row_offsets }
    }

    pub fn n(&self) -> usize {
        self.layout.len()
    }

    pub fn m(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    /// First row of block `b`.
    pub fn row_offset(&self, b: usize) -> usize {
        self.row_offsets[b]
    }

    pub fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let lo = self.blocks.iter().flat_map(|b| b.lower.iter().copied());
        let hi = self.blocks.iter().flat_map(|b| b.upper.iter().copied());
        (DVector::from_iterator(self.m(), lo), DVector::from_iterator(self.m(), hi))
    }

    pub fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        let parts: Vec<Vec<f64>> = self.blocks.par_iter().map(|b| b.eval(x.as_slice())).collect();
        DVector::from_iterator(self.m(), parts.into_iter().flatten())
    }

    /// Dense Jacobian of every block over its local variables.
    pub fn jacobians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks.par_iter().map(|b| b.jacobian(x.as_slice())).collect()
    }

    pub fn objective_value(&self, x: &DVector<f64>) -> f64 {
        self.objective
            .par_iter()
            .map(|t| {
                let mut e = vec![0.0; t.func.dim()];
                t.func.eval(&gather(&t.vars, x.as_slice()), &mut e);
                t.weight * e.iter().map(|v| v * v).sum::<f64>()
            })
            .sum()
    }

    /// Gradient and Hessian blocks of every objective term. Linear residuals
    /// give the exact `2w JᵀJ`; nonlinear ones add the residual curvature by
    /// differencing the gradient `2w Jᵀe`.
    pub fn objective_derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let parts: Vec<(DVector<f64>, DMatrix<f64>)> = self
            .objective
            .par_iter()
            .map(|t| {
                let rows = t.func.dim();
                let grad = |v: &[f64]| {
                    let mut e = DVector::zeros(rows);
                    t.func.eval(v, e.as_mut_slice());
                    let mut j = DMatrix::zeros(rows, v.len());
                    t.func.jacobian(v, &mut j);
                    let g = j.transpose() * &e * (2.0 * t.weight);
                    (g, j)
                };
                let v = gather(&t.vars, x.as_slice());
                let (g, j) = grad(&v);
                let mut h = j.transpose() * &j * (2.0 * t.weight);
                if !t.func.is_linear() {
                    let mut w = v.clone();
                    let mut fd = DMatrix::zeros(v.len(), v.len());
                    for c in 0..v.len() {
                        let step = HESSIAN_STEP * v[c].abs().max(1.0);
                        w[c] = v[c] + step;
                        let gp = grad(&w).0;
                        w[c] = v[c] - step;
                        let gm = grad(&w).0;
                        w[c] = v[c];
                        fd.set_column(c, &((gp - gm) / (2.0 * step)));
                    }
                    h = (&fd + fd.transpose()) * 0.5;
                }
                (g, h)
            })
            .collect();
        let mut grad = DVector::zeros(self.n());
        let mut hess = Vec::with_capacity(parts.len());
        for (t, (g, h)) in self.objective.iter().zip(parts) {
            for (a, &j) in t.vars.iter().enumerate() {
                grad[j] += g[a];
            }
            hess.push(h);
        }
        (grad, hess)
    }

    /// `∂²(yᵀ c_b)/∂v²` of block `b`, by differencing its Jacobian; `None` for linear blocks.
    pub fn block_hessian(&self, b: usize, x: &DVector<f64>, y: &[f64]) -> Option<DMatrix<f64>> {
        let block = &self.blocks[b];
        if block.func.is_linear() || y.iter().all(|v| *v == 0.0) {
            return None;
        }
        let v = block.gather(x.as_slice());
        let n = v.len();
        let rows = block.dim();
        let ycol = DVector::from_column_slice(y);
        let grad = |w: &[f64]| {
            let mut j = DMatrix::zeros(rows, n);
            block.func.jacobian(w, &mut j);
            j.transpose() * &ycol
        };
        let mut h = DMatrix::zeros(n, n);
        let mut w = v.clone();
        for c in 0..n {
            let step = HESSIAN_STEP * v[c].abs().max(1.0);
            w[c] = v[c] + step;
            let gp = grad(&w);
            w[c] = v[c] - step;
            let gm = grad(&w);
            w[c] = v[c];
            h.set_column(c, &((gp - gm) / (2.0 * step)));
        }
        Some((&h + h.transpose()) * 0.5)
    }

    /// Largest bound violation over all blocks and the index of the worst block.
    pub fn max_violation(&self, x: &DVector<f64>) -> (f64, Option<usize>) {
        self.blocks
            .par_iter()
            .enumerate()
            .map(|(i, b)| (b.violation(&b.eval(x.as_slice())), Some(i)))
            .reduce(|| (0.0, None), |a, b| if b.0 > a.0 { b } else { a })
    }

    pub fn block_name(&self, b: usize) -> String {
        self.blocks[b].name(&self.leg_names)
    }

    /// Compares every block's Jacobian with central differences at `x`.
    pub fn check_jacobians(&self, x: &DVector<f64>, step: f64) -> JacobianReport {
        let per_block: Vec<(BlockKind, bool, bool, f64)> = self
            .blocks
            .par_iter()
            .map(|b| {
                let v = b.gather(x.as_slice());
                let kink = b.func.at_kink(&v);
                (b.kind, b.func.analytic_jacobian(), kink, jacobian_error(b.func.as_ref(), &v, step))
            })
            .collect();
        let mut by_kind: BTreeMap<BlockKind, BlockJacobianError> = BTreeMap::new();
        for (kind, analytic, kink, err) in per_block {
            let e = by_kind.entry(kind).or_insert(BlockJacobianError { kind, blocks: 0, analytic, max_rel_error: 0.0, kinks: 0 });
            e.blocks += 1;
            if kink {
                e.kinks += 1;
            } else {
                e.max_rel_error = e.max_rel_error.max(err);
            }
        }
        JacobianReport { step, blocks: by_kind.into_values().collect() }
    }

    pub fn unpack(&self, x: &DVector<f64>) -> Result<Trajectory> {
        self.layout.unpack(x, &self.schedule)
    }

    /// Dense Jacobian of the whole constraint vector by central differences;
    /// intended for tests on small problems.
    pub fn dense_fd_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.m(), self.n());
        central_difference(|v, out| out.copy_from_slice(self.constraints(&DVector::from_column_slice(v)).as_slice()), x.as_slice(), self.m(), &mut j);
        j
    }
}
