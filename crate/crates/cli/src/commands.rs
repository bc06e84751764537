//! Subcommand implementations. Each returns a process exit code.

use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use srbd_core::model::RobotModel;
use srbd_core::nlp::{solve, transcribe, JacobianReport, NlpProblem};
use srbd_core::polytope::{exact_force_polytope, morph_polar, HalfspacePolytope, PolarFootCoord, PolytopeDeviation};

use crate::config::{Overrides, Scenario};
use crate::error::{CliError, CliResult};
use crate::report::{validate, write_artifacts, write_report, RunReport};
use crate::trajectory_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
/// Unreadable input: bad config, schema error, I/O failure.
pub const EXIT_INPUT: i32 = 3;

/// Largest relative Jacobian error accepted by `jacobian-check`.
pub const JACOBIAN_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub code: i32,
    pub out_dir: PathBuf,
    pub report: RunReport,
}

pub fn build_problem(scenario: &Scenario, overrides: Overrides) -> CliResult<NlpProblem> {
    let mut options = scenario.config.constraints.clone();
    overrides.apply(&mut options);
    Ok(transcribe(&scenario.model, &scenario.terrain, &scenario.schedule, &scenario.task, &options)?)
}

/// Transcribes, solves and validates one scenario and writes its artifacts.
pub fn run(scenario: &Scenario, overrides: Overrides, out_dir: Option<&Path>) -> CliResult<RunOutcome> {
    let name = &scenario.config.name;
    let problem = build_problem(scenario, overrides)?;
    log::info!("{name}: {} variables, {} constraints", problem.n(), problem.m());
    let solution = solve(&problem, &scenario.config.solver)?;
    let stats = solution.stats.clone();
    log::info!("{name}: {:?} after {} iterations, max violation {:.2e}", stats.status, stats.iterations, stats.max_violation);
    let validation = validate(scenario, &problem, &solution.trajectory)?;
    let code = if !stats.converged() {
        log::error!(
            "{name}: solver stopped with {:?}, worst block {}",
            stats.status,
            stats.worst_block.as_deref().unwrap_or("none")
        );
        EXIT_NOT_CONVERGED
    } else if !validation.passed {
        for f in &validation.failures {
            log::error!("{name}: {f}");
        }
        EXIT_VALIDATION
    } else {
        EXIT_OK
    };
    let mut constraints = scenario.config.constraints.clone();
    overrides.apply(&mut constraints);
    let report = RunReport { scenario: name.clone(), constraints, solve: Some(stats), validation };
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| scenario.output_dir());
    write_artifacts(&dir, scenario, &solution.trajectory, &report)?;
    Ok(RunOutcome { code, out_dir: dir, report })
}

/// Validates an existing trajectory against a scenario without solving.
pub fn check(scenario: &Scenario, trajectory_path: &Path, overrides: Overrides, out_dir: Option<&Path>) -> CliResult<RunOutcome> {
    let text = std::fs::read_to_string(trajectory_path).map_err(|e| CliError::io(trajectory_path, e))?;
    let legs: Vec<String> = scenario.model.legs.iter().map(|l| l.name.clone()).collect();
    let trajectory = trajectory_csv::read(&text, &legs, &scenario.schedule, scenario.task.dt)?;
    let problem = build_problem(scenario, overrides)?;
    let validation = validate(scenario, &problem, &trajectory)?;
    for f in &validation.failures {
        log::error!("{}: {f}", scenario.config.name);
    }
    let code = if validation.passed { EXIT_OK } else { EXIT_VALIDATION };
    let mut constraints = scenario.config.constraints.clone();
    overrides.apply(&mut constraints);
    let report = RunReport { scenario: scenario.config.name.clone(), constraints, solve: None, validation };
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| trajectory_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    write_report(&dir, &report)?;
    Ok(RunOutcome { code, out_dir: dir, report })
}

/// `(l, α)` samples of the sagittal polar chart.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolytopeGrid {
    pub samples: Vec<(f64, f64)>,
}

impl PolytopeGrid {
    /// `nl × na` grid over `[l1, l3] × [alpha_min, alpha_max]`, endpoints
    /// included; a single sample in a direction sits at the range start.
    pub fn regular(l_range: (f64, f64), nl: usize, alpha_range: (f64, f64), na: usize) -> Self {
        let lin = |(a, b): (f64, f64), n: usize, i: usize| if n > 1 { a + (b - a) * i as f64 / (n - 1) as f64 } else { a };
        let samples = (0..nl).flat_map(|i| (0..na).map(move |j| (lin(l_range, nl, i), lin(alpha_range, na, j)))).collect();
        PolytopeGrid { samples }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolytopeSample {
    pub l: f64,
    pub alpha: f64,
    pub deviation: PolytopeDeviation,
}

/// Morphed and exact sagittal polytopes of one leg at each sample.
pub fn polytope_pairs(model: &RobotModel, leg: usize, grid: &PolytopeGrid) -> CliResult<Vec<(HalfspacePolytope, HalfspacePolytope, PolytopeSample)>> {
    let lm = &model.legs[leg];
    let chain = model.sagittal_leg(leg);
    grid.samples
        .iter()
        .map(|&(l, alpha)| {
            let morphed = morph_polar(&PolarFootCoord { l, alpha }, &lm.polytopes);
            let q = chain.ik(&Vector3::new(l * alpha.sin(), 0.0, -l * alpha.cos()))?;
            let exact = exact_force_polytope(&q, &chain, &lm.torque_limits[1..])?;
            let deviation = morphed.deviation(&exact)?;
            Ok((morphed, exact, PolytopeSample { l, alpha, deviation }))
        })
        .collect()
}

/// Writes `polytopes.csv` (one facet per row) and `polytope_errors.csv`.
pub fn polytope_dump(model: &RobotModel, leg: usize, grid: &PolytopeGrid, out_dir: &Path) -> CliResult<Vec<PolytopeSample>> {
    let pairs = polytope_pairs(model, leg, grid)?;
    let f = trajectory_csv::format_value;
    let mut facets = csv::Writer::from_writer(Vec::new());
    facets.write_record(["sample", "l", "alpha", "source", "row", "n_x", "n_z", "d"]).expect("in-memory write");
    let mut errors = csv::Writer::from_writer(Vec::new());
    errors.write_record(["sample", "l", "alpha", "max_angle_deg", "max_offset_rel", "max_row_error"]).expect("in-memory write");
    for (s, (morphed, exact, sample)) in pairs.iter().enumerate() {
        for (source, p) in [("morphed", morphed), ("exact", exact)] {
            for r in 0..p.facet_count() {
                let nums = [p.normals[(r, 0)], p.normals[(r, 1)], p.offsets[r]].map(f);
                let mut row = vec![s.to_string(), f(sample.l), f(sample.alpha), source.to_string(), r.to_string()];
                row.extend(nums);
                facets.write_record(&row).expect("in-memory write");
            }
        }
        let d = &sample.deviation;
        let mut row = vec![s.to_string()];
        row.extend([sample.l, sample.alpha, d.max_angle.to_degrees(), d.max_offset_rel, d.max_row_error].map(f));
        errors.write_record(&row).expect("in-memory write");
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, w) in [("polytopes.csv", facets), ("polytope_errors.csv", errors)] {
        let path = out_dir.join(name);
        std::fs::write(&path, w.into_inner().expect("in-memory flush")).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(pairs.into_iter().map(|p| p.2).collect())
}

/// Analytic against central-difference Jacobians at the initial guess and
/// at `samples − 1` random perturbations of it.
pub fn jacobian_check(problem: &NlpProblem, samples: usize, seed: u64, step: f64) -> Vec<JacobianReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..samples)
        .map(|s| {
            let x = if s == 0 {
                problem.x0.clone()
            } else {
                DVector::from_iterator(
                    problem.n(),
                    problem.x0.iter().zip(problem.var_scale.iter()).map(|(v, sc)| v + 0.02 * sc * rng.random_range(-1.0..1.0)),
                )
            };
            problem.check_jacobians(&x, step)
        })
        .collect()
}

pub fn jacobians_pass(reports: &[JacobianReport]) -> bool {
    reports.iter().flat_map(|r| &r.blocks).all(|b| !b.analytic || b.max_rel_error < JACOBIAN_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_grid_covers_the_corners() {
        let g = PolytopeGrid::regular((0.35, 0.65), 10, (-0.4, 0.4), 5);
        assert_eq!(g.samples.len(), 50);
        assert_eq!(g.samples[0], (0.35, -0.4));
        assert_eq!(g.samples[49], (0.65, 0.4));
        assert!(PolytopeGrid::regular((0.35, 0.65), 0, (-0.4, 0.4), 5).samples.is_empty());
    }

    #[test]
    fn nominal_sample_is_exact() {
        let model = RobotModel::hyq_like();
        let l2 = model.legs[0].polytopes.distances[1];
        let pairs = polytope_pairs(&model, 0, &PolytopeGrid { samples: vec![(l2, 0.0)] }).unwrap();
        assert!(pairs[0].2.deviation.max_row_error < 1e-9);
    }
}
