//! Primal-dual interior-point solver for [`NlpProblem`].
//!
//! Inequality rows get slacks `c_I(x) − s = 0` with `l ≤ s ≤ u` handled by a
//! log barrier. The Newton system is condensed onto `(dx, dy_E)`:
//!
//! ```text
//! [ W + J_Iᵀ Σ J_I + δ_w I   J_Eᵀ ] [ dx  ]
//! [ J_E                      −δ_c ] [ dy_E ]
//! ```
//!
//! and factorised by a sparse LDLᵀ in a knot-by-knot elimination order. The
//! Lagrangian Hessian is the Gauss–Newton objective term plus finite
//! differences of every nonlinear block's `Jᵀy`. Steps are globalised with a
//! filter line search on (constraint violation, barrier objective) with
//! second-order corrections. When no step is acceptable the proximal term on
//! the Hessian is raised, the filter is cleared and the iteration retried.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ldl::{Factor, Symbolic, UpperCsc};
use super::problem::NlpProblem;
use crate::error::{Error, Result};
use crate::model::Trajectory;

const STATIC_REG: f64 = 1e-8;
const DELTA_W_FIRST: f64 = 1e-4;
const DELTA_W_MIN: f64 = 1e-20;
const DELTA_W_MAX: f64 = 1e40;
const ARMIJO: f64 = 1e-4;
const BOUND_PUSH: f64 = 1e-2;
const KAPPA_SIGMA: f64 = 1e10;
const SCALE_MAX: f64 = 100.0;
const OBJECTIVE_SCALE_MAX: f64 = 1e6;
const REFINE_STEPS: usize = 5;
const MIN_STEP: f64 = 1e-12;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const THETA_MAX_FACTOR: f64 = 1e4;
const THETA_MIN_FACTOR: f64 = 1e-4;
const SOC_MAX: usize = 4;
const SOC_DECREASE: f64 = 0.99;
const PROX_FIRST: f64 = 1e-4;
const PROX_GROWTH: f64 = 10.0;
const PROX_TRIGGER: f64 = 0.1;
const PROX_RETRY: f64 = 100.0;
const PROX_MAX: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Largest unscaled bound violation accepted at convergence.
    pub feasibility_tol: f64,
    /// Scaled KKT stationarity and complementarity accepted at convergence.
    pub stationarity_tol: f64,
    /// Looser stationarity accepted once it has held, together with
    /// feasibility, for `acceptable_iterations` consecutive iterations or at
    /// the best point of a run that stops early.
    pub acceptable_tol: f64,
    pub acceptable_iterations: usize,
    pub mu_init: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 500,
            feasibility_tol: 1e-6,
            stationarity_tol: 1e-6,
            acceptable_tol: 1e-4,
            acceptable_iterations: 10,
            mu_init: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Feasible, with stationarity only within the acceptable tolerance.
    Acceptable,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub max_violation: f64,
    pub worst_block: Option<String>,
    pub objective: f64,
    pub stationarity: f64,
    pub wall_time_s: f64,
    pub variables: usize,
    pub constraints: usize,
    pub method: String,
}

impl SolveStats {
    pub fn converged(&self) -> bool {
        matches!(self.status, SolveStatus::Converged | SolveStatus::Acceptable)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<f64>,
    pub trajectory: Trajectory,
    pub stats: SolveStats,
}

impl Solution {
    /// Turns a non-converged run into the matching error.
    pub fn require_converged(self) -> Result<Self> {
        match self.stats.status {
            SolveStatus::Converged | SolveStatus::Acceptable => Ok(self),
            SolveStatus::MaxIterations => Err(Error::MaxIterations { iterations: self.stats.iterations }),
            SolveStatus::LineSearchFailure => Err(Error::LineSearchFailure { iteration: self.stats.iterations }),
        }
    }
}

/// Row classification and scaled bounds.
struct Rows {
    /// For every global row: `Ok(e)` for equality row `e`, `Err(i)` for inequality row `i`.
    class: Vec<std::result::Result<usize, usize>>,
    eq: Vec<usize>,
    ineq: Vec<usize>,
    target: DVector<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

/// Sparsity of the condensed KKT matrix and the storage slots every
/// contribution is added to.
struct Pattern {
    csc: UpperCsc,
    sym: Symbolic,
    var_pos: Vec<usize>,
    eq_pos: Vec<usize>,
    /// Upper-triangular local pairs `(a ≤ b)` of every block, row-major.
    block_pairs: Vec<Vec<usize>>,
    /// Slots of `(eq row, var)` for every block, one row of `nv` per block row
    /// (unused for inequality rows).
    block_eq: Vec<Vec<usize>>,
    obj_pairs: Vec<Vec<usize>>,
    var_diag: Vec<usize>,
    eq_diag: Vec<usize>,
}

fn upper_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (a..n).map(move |b| (a, b)))
}

impl Pattern {
    fn build(problem: &NlpProblem, rows: &Rows) -> Self {
        let n = problem.n();
        let m_e = rows.eq.len();
        // Each equality row is eliminated right after the last variable it touches.
        let mut keys: Vec<(usize, usize, usize)> = (0..n).map(|j| (j, 0, j)).collect();
        for (b, block) in problem.blocks.iter().enumerate() {
            let last = *block.vars.iter().max().unwrap_or(&0);
            let r0 = problem.row_offset(b);
            for r in 0..block.dim() {
                if let Ok(e) = rows.class[r0 + r] {
                    keys.push((last, 1, e));
                }
            }
        }
        keys.sort_unstable();
        let mut var_pos = vec![0; n];
        let mut eq_pos = vec![0; m_e];
        for (pos, &(_, kind, id)) in keys.iter().enumerate() {
            if kind == 0 {
                var_pos[id] = pos;
            } else {
                eq_pos[id] = pos;
            }
        }
        let mut entries = Vec::new();
        for (b, block) in problem.blocks.iter().enumerate() {
            let nv = block.vars.len();
            entries.extend(upper_pairs(nv).map(|(a, c)| (var_pos[block.vars[a]], var_pos[block.vars[c]])));
            let r0 = problem.row_offset(b);
            for r in 0..block.dim() {
                if let Ok(e) = rows.class[r0 + r] {
                    entries.extend(block.vars.iter().map(|&j| (eq_pos[e], var_pos[j])));
                }
            }
        }
        for t in &problem.objective {
            entries.extend(upper_pairs(t.vars.len()).map(|(a, c)| (var_pos[t.vars[a]], var_pos[t.vars[c]])));
        }
        let csc = UpperCsc::from_pattern(n + m_e, entries);
        let sym = Symbolic::analyse(&csc);
        let block_pairs = problem
            .blocks
            .iter()
            .map(|block| upper_pairs(block.vars.len()).map(|(a, c)| csc.slot(var_pos[block.vars[a]], var_pos[block.vars[c]])).collect())
            .collect();
        let block_eq = problem
            .blocks
            .iter()
            .enumerate()
            .map(|(b, block)| {
                let r0 = problem.row_offset(b);
                let mut slots = Vec::with_capacity(block.dim() * block.vars.len());
                for r in 0..block.dim() {
                    match rows.class[r0 + r] {
                        Ok(e) => slots.extend(block.vars.iter().map(|&j| csc.slot(eq_pos[e], var_pos[j]))),
                        Err(_) => slots.extend(std::iter::repeat_n(usize::MAX, block.vars.len())),
                    }
                }
                slots
            })
            .collect();
        let obj_pairs = problem
            .objective
            .iter()
            .map(|t| upper_pairs(t.vars.len()).map(|(a, c)| csc.slot(var_pos[t.vars[a]], var_pos[t.vars[c]])).collect())
            .collect();
        let var_diag = (0..n).map(|j| csc.slot(var_pos[j], var_pos[j])).collect();
        let eq_diag = (0..m_e).map(|e| csc.slot(eq_pos[e], eq_pos[e])).collect();
        Pattern { csc, sym, var_pos, eq_pos, block_pairs, block_eq, obj_pairs, var_diag, eq_diag }
    }
}

/// Scaled problem: `x = D x̃`, rows multiplied by `w`, objective by `sf`.
struct Scaled<'a> {
    problem: &'a NlpProblem,
    d: DVector<f64>,
    w: DVector<f64>,
    sf: f64,
    rows: Rows,
}

/// Function values and first derivatives at a scaled point.
struct Point {
    x: DVector<f64>,
    c: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    jac: Vec<DMatrix<f64>>,
    obj_hess: Vec<DMatrix<f64>>,
}

impl<'a> Scaled<'a> {
    fn new(problem: &'a NlpProblem) -> Self {
        let d = problem.var_scale.clone();
        let x0 = &problem.x0;
        let jac = problem.jacobians(x0);
        let mut w = DVector::from_element(problem.m(), 1.0);
        for (b, j) in jac.iter().enumerate() {
            let vars = &problem.blocks[b].vars;
            let r0 = problem.row_offset(b);
            for r in 0..j.nrows() {
                let g = (0..j.ncols()).map(|c| (j[(r, c)] * d[vars[c]]).abs()).fold(0.0, f64::max);
                w[r0 + r] = 1.0 / g.max(1.0);
            }
        }
        // The objective is a weak regulariser; scale it so its curvature in
        // the scaled variables is of order one.
        let (_, hess) = problem.objective_derivatives(x0);
        let curvature = problem
            .objective
            .iter()
            .zip(&hess)
            .flat_map(|(t, h)| { let d = &d; t.vars.iter().enumerate().map(move |(a, &j)| h[(a, a)] * d[j] * d[j]) })
            .fold(0.0, f64::max);
        let sf = if curvature > 0.0 { (1.0 / curvature).clamp(1e-6, OBJECTIVE_SCALE_MAX) } else { 1.0 };
        let (lo, hi) = problem.bounds();
        let mut class = Vec::with_capacity(problem.m());
        let (mut eq, mut ineq) = (Vec::new(), Vec::new());
        let (mut target, mut ilo, mut ihi) = (Vec::new(), Vec::new(), Vec::new());
        for r in 0..problem.m() {
            if lo[r] == hi[r] {
                class.push(Ok(eq.len()));
                eq.push(r);
                target.push(lo[r] * w[r]);
            } else {
                class.push(Err(ineq.len()));
                ineq.push(r);
                ilo.push(lo[r] * w[r]);
                ihi.push(hi[r] * w[r]);
            }
        }
        let rows = Rows { class, eq, ineq, target: DVector::from_vec(target), lo: DVector::from_vec(ilo), hi: DVector::from_vec(ihi) };
        Scaled { problem, d, w, sf, rows }
    }

    fn unscale(&self, xs: &DVector<f64>) -> DVector<f64> {
        xs.component_mul(&self.d)
    }

    /// Scaled constraints and objective only, for line-search trials.
    fn values(&self, xs: &DVector<f64>) -> (DVector<f64>, f64) {
        let x = self.unscale(xs);
        (self.problem.constraints(&x).component_mul(&self.w), self.sf * self.problem.objective_value(&x))
    }

    fn point(&self, xs: DVector<f64>) -> Point {
        let x = self.unscale(&xs);
        let c = self.problem.constraints(&x).component_mul(&self.w);
        let f = self.sf * self.problem.objective_value(&x);
        let (g, obj_hess) = self.problem.objective_derivatives(&x);
        let g = g.component_mul(&self.d) * self.sf;
        let mut jac = self.problem.jacobians(&x);
        for (b, j) in jac.iter_mut().enumerate() {
            let vars = &self.problem.blocks[b].vars;
            let r0 = self.problem.row_offset(b);
            for c in 0..j.ncols() {
                let dc = self.d[vars[c]];
                for r in 0..j.nrows() {
                    j[(r, c)] *= dc * self.w[r0 + r];
                }
            }
        }
        Point { x: xs, c, f, g, jac, obj_hess }
    }

    fn jt_mul(&self, jac: &[DMatrix<f64>], y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.problem.n());
        for (b, j) in jac.iter().enumerate() {
            let vars = &self.problem.blocks[b].vars;
            let r0 = self.problem.row_offset(b);
            for c in 0..j.ncols() {
                let mut acc = 0.0;
                for r in 0..j.nrows() {
                    acc += j[(r, c)] * y[r0 + r];
                }
                out[vars[c]] += acc;
            }
        }
        out
    }

    fn j_mul(&self, jac: &[DMatrix<f64>], dx: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.problem.m());
        for (b, j) in jac.iter().enumerate() {
            let vars = &self.problem.blocks[b].vars;
            let r0 = self.problem.row_offset(b);
            for r in 0..j.nrows() {
                out[r0 + r] = (0..j.ncols()).map(|c| j[(r, c)] * dx[vars[c]]).sum();
            }
        }
        out
    }

    /// Residuals `(c_E − t, c_I − s)`.
    fn primal(&self, c: &DVector<f64>, s: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let th_e = DVector::from_iterator(self.rows.eq.len(), self.rows.eq.iter().enumerate().map(|(e, &r)| c[r] - self.rows.target[e]));
        let th_i = DVector::from_iterator(self.rows.ineq.len(), self.rows.ineq.iter().enumerate().map(|(i, &r)| c[r] - s[i]));
        (th_e, th_i)
    }

    /// Largest unscaled bound violation and the block it occurs in.
    fn violation(&self, c: &DVector<f64>) -> (f64, Option<usize>) {
        let mut worst = (0.0, None);
        for (b, block) in self.problem.blocks.iter().enumerate() {
            let r0 = self.problem.row_offset(b);
            let vals: Vec<f64> = (0..block.dim()).map(|r| c[r0 + r] / self.w[r0 + r]).collect();
            let v = block.violation(&vals);
            if v > worst.0 {
                worst = (v, Some(b));
            }
        }
        worst
    }
}

struct Barrier<'a> {
    lo: &'a DVector<f64>,
    hi: &'a DVector<f64>,
}

impl Barrier<'_> {
    fn value(&self, s: &DVector<f64>, mu: f64) -> f64 {
        let mut v = 0.0;
        for i in 0..s.len() {
            if self.lo[i].is_finite() {
                v -= mu * (s[i] - self.lo[i]).ln();
            }
            if self.hi[i].is_finite() {
                v -= mu * (self.hi[i] - s[i]).ln();
            }
        }
        v
    }

    fn slope(&self, s: &DVector<f64>, ds: &DVector<f64>, mu: f64) -> f64 {
        let mut v = 0.0;
        for i in 0..s.len() {
            if self.lo[i].is_finite() {
                v -= mu * ds[i] / (s[i] - self.lo[i]);
            }
            if self.hi[i].is_finite() {
                v += mu * ds[i] / (self.hi[i] - s[i]);
            }
        }
        v
    }

    /// Largest step in `(0, 1]` keeping `s + α ds` a fraction `τ` inside the bounds.
    fn max_step(&self, s: &DVector<f64>, ds: &DVector<f64>, tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..s.len() {
            if ds[i] < 0.0 && self.lo[i].is_finite() {
                a = a.min(-tau * (s[i] - self.lo[i]) / ds[i]);
            }
            if ds[i] > 0.0 && self.hi[i].is_finite() {
                a = a.min(tau * (self.hi[i] - s[i]) / ds[i]);
            }
        }
        a
    }
}

fn max_dual_step(z: &DVector<f64>, dz: &DVector<f64>, tau: f64) -> f64 {
    z.iter().zip(dz.iter()).filter(|(_, d)| **d < 0.0).map(|(z, d)| -tau * z / d).fold(1.0, f64::min)
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

struct Direction {
    dx: DVector<f64>,
    ds: DVector<f64>,
    dy: DVector<f64>,
}

/// Newton system factorisation for one iterate.
struct Kkt<'p> {
    pattern: &'p Pattern,
    factor: Factor,
    /// Diagonal added for inertia correction; refinement keeps it.
    delta_w: f64,
}

/// Runs the interior-point method from `problem.x0`.
pub fn solve(problem: &NlpProblem, options: &SolverOptions) -> Result<Solution> {
    let start = Instant::now();
    let sc = Scaled::new(problem);
    let pattern = Pattern::build(problem, &sc.rows);
    let (m, m_e, m_i) = (problem.m(), sc.rows.eq.len(), sc.rows.ineq.len());
    let n = problem.n();
    let lo = sc.rows.lo.clone();
    let hi = sc.rows.hi.clone();
    let barrier = Barrier { lo: &lo, hi: &hi };
    log::info!("solving: {n} variables, {m_e} equality rows, {m_i} inequality rows, factor nnz {}", pattern.sym.factor_nnz());

    let mut pt = sc.point(problem.x0.component_div(&sc.d));
    if !pt.c.iter().all(|v| v.is_finite()) || !pt.f.is_finite() {
        return Err(Error::InvalidModel("initial guess evaluates to non-finite values".into()));
    }
    let mut s = DVector::from_iterator(
        m_i,
        sc.rows.ineq.iter().enumerate().map(|(i, &r)| {
            let (l, u) = (lo[i], hi[i]);
            let pl = if l.is_finite() { BOUND_PUSH * l.abs().max(1.0) } else { 0.0 };
            let pu = if u.is_finite() { BOUND_PUSH * u.abs().max(1.0) } else { 0.0 };
            let (pl, pu) = if l.is_finite() && u.is_finite() {
                (pl.min(BOUND_PUSH * (u - l)), pu.min(BOUND_PUSH * (u - l)))
            } else {
                (pl, pu)
            };
            let mut v = pt.c[r];
            if l.is_finite() {
                v = v.max(l + pl);
            }
            if u.is_finite() {
                v = v.min(u - pu);
            }
            v
        }),
    );
    let mut y = DVector::zeros(m);
    let mut zl = DVector::from_iterator(m_i, lo.iter().map(|l| if l.is_finite() { 1.0 } else { 0.0 }));
    let mut zu = DVector::from_iterator(m_i, hi.iter().map(|u| if u.is_finite() { 1.0 } else { 0.0 }));
    let mut mu = options.mu_init;
    let mu_min = options.stationarity_tol.min(options.feasibility_tol) / 10.0;
    let (th_e0, th_i0) = sc.primal(&pt.c, &s);
    let theta_init = l1(&th_e0) + l1(&th_i0);
    let theta_max = THETA_MAX_FACTOR * theta_init.max(1.0);
    let theta_min = THETA_MIN_FACTOR * theta_init.max(1.0);
    let mut filter: Vec<(f64, f64)> = Vec::new();
    let mut filter_mu = mu;
    let mut delta_last: f64 = 0.0;
    // Proximal term raised when the line search has to cut the step hard.
    let mut prox: f64 = 0.0;
    let mut best: Option<(DVector<f64>, f64, f64)> = None;
    let mut status = SolveStatus::MaxIterations;
    let mut acceptable_run = 0;
    let mut iterations = 0;
    let mut stationarity = f64::INFINITY;
    let mut csc = pattern.csc.clone();

    for iter in 0..=options.max_iterations {
        iterations = iter;
        let (th_e, th_i) = sc.primal(&pt.c, &s);
        let r_d = &pt.g + sc.jt_mul(&pt.jac, &y);
        let y_i = DVector::from_iterator(m_i, sc.rows.ineq.iter().map(|&r| y[r]));
        let r_s = -&y_i - &zl + &zu;
        let comp = |mu: f64| {
            let mut e: f64 = 0.0;
            for i in 0..m_i {
                if lo[i].is_finite() {
                    e = e.max((zl[i] * (s[i] - lo[i]) - mu).abs());
                }
                if hi[i].is_finite() {
                    e = e.max((zu[i] * (hi[i] - s[i]) - mu).abs());
                }
            }
            e
        };
        let z_sum = l1(&zl) + l1(&zu);
        let s_d = ((l1(&y) + z_sum) / (m + 2 * m_i).max(1) as f64).max(SCALE_MAX) / SCALE_MAX;
        let s_c = (z_sum / (2 * m_i).max(1) as f64).max(SCALE_MAX) / SCALE_MAX;
        let e_dual = r_d.amax().max(r_s.amax()) / s_d;
        let e_primal = th_e.amax().max(th_i.amax());
        let (viol, _) = sc.violation(&pt.c);
        stationarity = e_dual.max(comp(0.0) / s_c);
        let better = match &best {
            None => true,
            Some((_, bv, bs)) => {
                let feas = viol <= options.feasibility_tol;
                let bfeas = *bv <= options.feasibility_tol;
                (feas && !bfeas) || (feas == bfeas && if feas { stationarity < *bs } else { viol < *bv })
            }
        };
        if better {
            best = Some((pt.x.clone(), viol, stationarity));
        }
        log::debug!(
            "iter {iter:4}  f {:+.6e}  viol {viol:.2e}  dual {e_dual:.2e}  comp {:.2e}  mu {mu:.1e}  δw {delta_last:.1e}",
            pt.f / sc.sf,
            comp(0.0)
        );
        if viol <= options.feasibility_tol && stationarity <= options.stationarity_tol {
            status = SolveStatus::Converged;
            break;
        }
        acceptable_run = if viol <= options.feasibility_tol && stationarity <= options.acceptable_tol { acceptable_run + 1 } else { 0 };
        if acceptable_run >= options.acceptable_iterations.max(1) {
            status = SolveStatus::Acceptable;
            break;
        }
        if iter == options.max_iterations {
            break;
        }
        while mu > mu_min && e_dual.max(e_primal).max(comp(mu) / s_c) <= 10.0 * mu {
            mu = mu_min.max((0.2 * mu).min(mu.powf(1.5)));
        }

        // Sigma and the condensed right-hand side.
        let mut sigma = DVector::zeros(m_i);
        let mut rt = y_i.clone();
        for i in 0..m_i {
            if lo[i].is_finite() {
                sigma[i] += zl[i] / (s[i] - lo[i]);
                rt[i] += mu / (s[i] - lo[i]);
            }
            if hi[i].is_finite() {
                sigma[i] += zu[i] / (hi[i] - s[i]);
                rt[i] -= mu / (hi[i] - s[i]);
            }
        }
        let mut sig_full = DVector::zeros(m);
        for (i, &r) in sc.rows.ineq.iter().enumerate() {
            sig_full[r] = sigma[i];
        }

        // Lagrangian Hessian per block, with multipliers in unscaled rows.
        let hessians: Vec<Option<DMatrix<f64>>> = problem
            .blocks
            .par_iter()
            .enumerate()
            .map(|(b, block)| {
                let r0 = problem.row_offset(b);
                let yb: Vec<f64> = (0..block.dim()).map(|r| y[r0 + r] * sc.w[r0 + r]).collect();
                let x = sc.unscale(&pt.x);
                problem.block_hessian(b, &x, &yb).map(|mut h| {
                    for a in 0..h.nrows() {
                        for c in 0..h.ncols() {
                            h[(a, c)] *= sc.d[block.vars[a]] * sc.d[block.vars[c]];
                        }
                    }
                    h
                })
            })
            .collect();

        csc.values.iter_mut().for_each(|v| *v = 0.0);
        for (b, block) in problem.blocks.iter().enumerate() {
            let nv = block.vars.len();
            let j = &pt.jac[b];
            let r0 = problem.row_offset(b);
            let sig: Vec<f64> = (0..block.dim()).map(|r| sig_full[r0 + r]).collect();
            let any_ineq = sig.iter().any(|v| *v != 0.0);
            let h = &hessians[b];
            if any_ineq || h.is_some() {
                for (k, (a, c)) in upper_pairs(nv).enumerate() {
                    let mut v = h.as_ref().map_or(0.0, |h| h[(a, c)]);
                    if any_ineq {
                        for r in 0..block.dim() {
                            v += j[(r, a)] * sig[r] * j[(r, c)];
                        }
                    }
                    csc.values[pattern.block_pairs[b][k]] += v;
                }
            }
            for r in 0..block.dim() {
                if sc.rows.class[r0 + r].is_ok() {
                    for c in 0..nv {
                        csc.values[pattern.block_eq[b][r * nv + c]] += j[(r, c)];
                    }
                }
            }
        }
        for (t, term) in problem.objective.iter().enumerate() {
            let h = &pt.obj_hess[t];
            for (k, (a, c)) in upper_pairs(term.vars.len()).enumerate() {
                csc.values[pattern.obj_pairs[t][k]] += sc.sf * h[(a, c)] * sc.d[term.vars[a]] * sc.d[term.vars[c]];
            }
        }
        for &slot in &pattern.var_diag {
            csc.values[slot] += STATIC_REG + prox;
        }
        for &slot in &pattern.eq_diag {
            csc.values[slot] -= STATIC_REG;
        }

        // Inertia correction: exactly m_E negative pivots.
        let mut delta: f64 = 0.0;
        let kkt = loop {
            let mut trial = csc.clone();
            if delta > 0.0 {
                for &slot in &pattern.var_diag {
                    trial.values[slot] += delta;
                }
            }
            match Factor::compute(&trial, &pattern.sym) {
                Ok(f) if f.negative_pivots() == m_e => break Kkt { pattern: &pattern, factor: f, delta_w: delta },
                _ => {}
            }
            delta = if delta == 0.0 {
                if delta_last == 0.0 {
                    DELTA_W_FIRST
                } else {
                    (delta_last / 3.0).max(DELTA_W_MIN)
                }
            } else if delta_last == 0.0 {
                delta * 100.0
            } else {
                delta * 8.0
            };
            if delta > DELTA_W_MAX {
                return Err(Error::Factorization(format!("inertia correction exceeded {DELTA_W_MAX:e} at iteration {iter}")));
            }
        };
        if kkt.delta_w > 0.0 {
            delta_last = kkt.delta_w;
        }
        let refine_csc = {
            let mut c = csc.clone();
            for &slot in &pattern.var_diag {
                c.values[slot] += kkt.delta_w;
            }
            c
        };
        let kkt_solver = RefineTarget { kkt: &kkt, csc: &refine_csc };

        let direction = |th_e: &DVector<f64>, th_i: &DVector<f64>| -> Direction {
            let mut tmp = DVector::zeros(m);
            for (i, &r) in sc.rows.ineq.iter().enumerate() {
                tmp[r] = sigma[i] * th_i[i] - rt[i];
            }
            let rhs_x = -&r_d - sc.jt_mul(&pt.jac, &tmp);
            let mut rhs = vec![0.0; n + m_e];
            for j in 0..n {
                rhs[pattern.var_pos[j]] = rhs_x[j];
            }
            for e in 0..m_e {
                rhs[pattern.eq_pos[e]] = -th_e[e];
            }
            let sol = kkt_solver.solve(&rhs);
            let dx = DVector::from_iterator(n, (0..n).map(|j| sol[pattern.var_pos[j]]));
            let jdx = sc.j_mul(&pt.jac, &dx);
            let ds = DVector::from_iterator(m_i, sc.rows.ineq.iter().enumerate().map(|(i, &r)| jdx[r] + th_i[i]));
            let mut dy = DVector::zeros(m);
            for e in 0..m_e {
                dy[sc.rows.eq[e]] = sol[pattern.eq_pos[e]];
            }
            for (i, &r) in sc.rows.ineq.iter().enumerate() {
                dy[r] = sigma[i] * ds[i] - rt[i];
            }
            Direction { dx, ds, dy }
        };
        let dir = direction(&th_e, &th_i);
        let mut dzl = DVector::zeros(m_i);
        let mut dzu = DVector::zeros(m_i);
        for i in 0..m_i {
            if lo[i].is_finite() {
                let gap = s[i] - lo[i];
                dzl[i] = mu / gap - zl[i] - zl[i] / gap * dir.ds[i];
            }
            if hi[i].is_finite() {
                let gap = hi[i] - s[i];
                dzu[i] = mu / gap - zu[i] + zu[i] / gap * dir.ds[i];
            }
        }

        let tau = 0.99f64.max(1.0 - mu);
        let alpha_max = barrier.max_step(&s, &dir.ds, tau).min(
            (0..n).filter(|&j| dir.dx[j] != 0.0).map(|j| problem.step_limit[j] / (dir.dx[j] * sc.d[j]).abs()).fold(1.0, f64::min),
        );
        let alpha_z = max_dual_step(&zl, &dzl, tau).min(max_dual_step(&zu, &dzu, tau));

        if mu != filter_mu {
            filter.clear();
            filter_mu = mu;
        }
        let theta0 = l1(&th_e) + l1(&th_i);
        let phi0 = pt.f + barrier.value(&s, mu);
        let slope = pt.g.dot(&dir.dx) + barrier.slope(&s, &dir.ds, mu);
        let trial = |dx: &DVector<f64>, ds: &DVector<f64>, a: f64| {
            let xt = &pt.x + dx * a;
            let st = &s + ds * a;
            let (ct, ft) = sc.values(&xt);
            let (te, ti) = sc.primal(&ct, &st);
            let finite = ct.iter().all(|v| v.is_finite()) && ft.is_finite();
            let th = if finite { l1(&te) + l1(&ti) } else { f64::INFINITY };
            let phi = if finite { ft + barrier.value(&st, mu) } else { f64::INFINITY };
            (xt, st, th, phi, te, ti)
        };
        // `Some(objective_step)` when the trial is acceptable.
        let acceptable = |th: f64, phi: f64, alpha: f64| -> Option<bool> {
            if !(th <= theta_max) || !phi.is_finite() || filter.iter().any(|&(ft, fp)| th >= ft && phi >= fp) {
                return None;
            }
            let switching = slope < 0.0 && alpha * (-slope).powf(S_PHI) > theta0.powf(S_THETA);
            if switching && theta0 <= theta_min {
                (phi <= phi0 + ARMIJO * alpha * slope).then_some(true)
            } else {
                (th <= (1.0 - GAMMA_THETA) * theta0 || phi <= phi0 - GAMMA_PHI * theta0).then_some(false)
            }
        };

        let mut accepted: Option<(DVector<f64>, DVector<f64>, f64, bool)> = None;
        let mut alpha = alpha_max;
        let mut first = true;
        while alpha >= MIN_STEP {
            let (xt, st, th, phi, te, ti) = trial(&dir.dx, &dir.ds, alpha);
            if let Some(ftype) = acceptable(th, phi, alpha) {
                accepted = Some((xt, st, alpha, ftype));
                break;
            }
            if first && th >= theta0 {
                // Second-order corrections on the rejected full step.
                let (mut ce, mut ci) = (&th_e * alpha + te, &th_i * alpha + ti);
                let mut th_prev = th;
                for _ in 0..SOC_MAX {
                    let soc = direction(&ce, &ci);
                    let a_soc = barrier.max_step(&s, &soc.ds, tau);
                    let (xs, ss, ths, phis, tes, tis) = trial(&soc.dx, &soc.ds, a_soc);
                    if let Some(ftype) = acceptable(ths, phis, alpha) {
                        accepted = Some((xs, ss, alpha, ftype));
                        break;
                    }
                    if ths > SOC_DECREASE * th_prev {
                        break;
                    }
                    th_prev = ths;
                    ce = &ce * a_soc + tes;
                    ci = &ci * a_soc + tis;
                }
                if accepted.is_some() {
                    break;
                }
            }
            first = false;
            alpha *= 0.5;
        }
        let Some((xt, st, alpha, ftype)) = accepted else {
            if prox >= PROX_MAX {
                log::warn!("line search failed at iteration {iter}");
                status = SolveStatus::LineSearchFailure;
                break;
            }
            prox = (prox * PROX_RETRY).max(PROX_FIRST * PROX_RETRY);
            filter.clear();
            log::debug!(
                "  no acceptable step (alpha_max {alpha_max:.1e}, theta {theta0:.3e}, slope {slope:.2e}, |dx| {:.1e}), retrying with prox {prox:.1e}",
                dir.dx.amax()
            );
            continue;
        };
        if !ftype {
            filter.push(((1.0 - GAMMA_THETA) * theta0, phi0 - GAMMA_PHI * theta0));
        }
        log::debug!(
            "  alpha {alpha:.3e} (max {alpha_max:.3e}), alpha_z {alpha_z:.3e}, |dx| {:.2e}, prox {prox:.1e}, δw {:.1e}{}",
            dir.dx.amax(),
            kkt.delta_w,
            if ftype { "" } else { " h" }
        );
        if alpha < PROX_TRIGGER * alpha_max {
            prox = (prox * PROX_GROWTH).max(PROX_FIRST);
        } else if alpha >= alpha_max {
            prox = if prox > PROX_FIRST { prox / PROX_GROWTH } else { 0.0 };
        }
        s = st;
        y += &dir.dy * alpha;
        zl += &dzl * alpha_z;
        zu += &dzu * alpha_z;
        for i in 0..m_i {
            if lo[i].is_finite() {
                let gap = s[i] - lo[i];
                zl[i] = zl[i].clamp(mu / (KAPPA_SIGMA * gap), KAPPA_SIGMA * mu / gap);
            }
            if hi[i].is_finite() {
                let gap = hi[i] - s[i];
                zu[i] = zu[i].clamp(mu / (KAPPA_SIGMA * gap), KAPPA_SIGMA * mu / gap);
            }
        }
        pt = sc.point(xt);
    }

    let xs = match (&status, best) {
        (SolveStatus::Converged | SolveStatus::Acceptable, _) | (_, None) => pt.x.clone(),
        (_, Some((bx, bv, bs))) => {
            if bv <= options.feasibility_tol && bs <= options.acceptable_tol {
                status = SolveStatus::Acceptable;
                stationarity = bs;
            }
            bx
        }
    };
    let x = sc.unscale(&xs);
    let (c, f) = sc.values(&xs);
    let (viol, worst) = sc.violation(&c);
    let stats = SolveStats {
        status,
        iterations,
        max_violation: viol,
        worst_block: worst.map(|b| problem.block_name(b)),
        objective: f / sc.sf,
        stationarity,
        wall_time_s: start.elapsed().as_secs_f64(),
        variables: n,
        constraints: m,
        method: "primal-dual interior point, filter line search".into(),
    };
    log::info!(
        "solver finished: {:?} after {} iterations, violation {:.2e}, objective {:.4e}, {:.2} s",
        stats.status,
        stats.iterations,
        stats.max_violation,
        stats.objective,
        stats.wall_time_s
    );
    let trajectory = problem.unpack(&x)?;
    Ok(Solution { x, trajectory, stats })
}

/// Factor of the regularised matrix paired with the matrix refinement aims at.
struct RefineTarget<'a, 'p> {
    kkt: &'a Kkt<'p>,
    csc: &'a UpperCsc,
}

impl RefineTarget<'_, '_> {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let p = self.kkt.pattern;
        let mut sol = rhs.to_vec();
        self.kkt.factor.solve_in_place(&mut sol);
        let mut ax = vec![0.0; rhs.len()];
        let norm = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
        for _ in 0..REFINE_STEPS {
            self.csc.mul(&sol, &mut ax);
            for j in 0..p.var_pos.len() {
                ax[p.var_pos[j]] -= STATIC_REG * sol[p.var_pos[j]];
            }
            for &e in &p.eq_pos {
                ax[e] += STATIC_REG * sol[e];
            }
            let mut res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if res.iter().map(|v| v.abs()).fold(0.0, f64::max) <= 1e-14 * norm {
                break;
            }
            self.kkt.factor.solve_in_place(&mut res);
            sol.iter_mut().zip(&res).for_each(|(s, r)| *s += r);
        }
        sol
    }
}
