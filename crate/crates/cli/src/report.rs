//! Post-solve validation and the `report.json` / plot-data artifacts.

use std::path::Path;

use serde::Serialize;
use srbd_core::model::Trajectory;
use srbd_core::nlp::{NlpProblem, SolveStats};
use srbd_core::validate::{
    audit, collision_sweep, straddling_footholds, torque_replay, AuditReport, Penetration, Straddle, TorqueReport,
};

use crate::config::Scenario;
use crate::error::{CliError, CliResult};
use crate::trajectory_csv;

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub passed: bool,
    /// One line per failed check, naming the block, joint or body involved.
    pub failures: Vec<String>,
    pub audit: AuditReport,
    pub torque: Option<TorqueReport>,
    pub collisions: Vec<Penetration>,
    pub straddles: Vec<Straddle>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub constraints: srbd_core::nlp::ProblemOptions,
    pub solve: Option<SolveStats>,
    pub validation: Validation,
}

/// Runs every trajectory oracle: constraint audit, torque replay, collision
/// sweep and foothold check, the last two on the sharp terrain.
pub fn validate(scenario: &Scenario, problem: &NlpProblem, trajectory: &Trajectory) -> CliResult<Validation> {
    let mut failures = Vec::new();
    let audit = audit(problem, trajectory)?;
    if !audit.passed() {
        failures.push(format!(
            "constraint audit: max violation {:.3e} in {}",
            audit.max_violation,
            audit.worst_block.as_deref().unwrap_or("?")
        ));
    }
    let torque = match torque_replay(trajectory, &scenario.model) {
        Ok(t) => {
            for j in t.joints.iter().filter(|j| j.peak_ratio() > 1.0 + srbd_core::validate::MINOR_VIOLATION) {
                failures.push(format!("torque: {} peaks at {:.1} N·m, limit {:.1} N·m", j.name, j.max_abs, j.limit));
            }
            Some(t)
        }
        Err(e) => {
            failures.push(format!("torque replay: {e}"));
            None
        }
    };
    let sharp = scenario.terrain.sharp();
    let collisions = collision_sweep(
        trajectory,
        &sharp,
        &scenario.model,
        scenario.config.validation.substeps,
        scenario.config.constraints.n_probe,
    );
    if let Some(deepest) = collisions.iter().max_by(|a, b| a.depth.total_cmp(&b.depth)) {
        failures.push(format!(
            "collision: {} penetrations, deepest {} {:?} at t = {:.2} s, {:.4} m",
            collisions.len(),
            deepest.leg_name,
            deepest.body,
            deepest.time,
            deepest.depth
        ));
    }
    let straddles = straddling_footholds(trajectory, &sharp, scenario.model.foot_radius);
    if let Some(s) = straddles.first() {
        failures.push(format!(
            "foothold: {} stance knots straddle a terrain edge, first {} at knot {}",
            straddles.len(),
            scenario.model.legs[s.leg].name,
            s.knot
        ));
    }
    Ok(Validation { passed: failures.is_empty(), failures, audit, torque, collisions, straddles })
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `trajectory.csv`, `report.json`, `torques.csv` and
/// `collisions.csv` into `dir`.
pub fn write_artifacts(dir: &Path, scenario: &Scenario, trajectory: &Trajectory, report: &RunReport) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let legs: Vec<String> = scenario.model.legs.iter().map(|l| l.name.clone()).collect();
    write_file(&dir.join("trajectory.csv"), &trajectory_csv::write(trajectory, &legs))?;
    write_report(dir, report)?;
    if let Some(t) = &report.validation.torque {
        write_file(&dir.join("torques.csv"), &torque_csv(t))?;
    }
    write_file(&dir.join("collisions.csv"), &collision_csv(&report.validation.collisions))?;
    Ok(())
}

pub fn write_report(dir: &Path, report: &RunReport) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("report.json"), &serde_json::to_string_pretty(report).expect("report serializes"))
}

/// Per-knot joint torques, one column per joint, limits in the second row.
pub fn torque_csv(t: &TorqueReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["t".to_string()];
    head.extend(t.joints.iter().map(|j| j.name.clone()));
    w.write_record(&head).expect("in-memory write");
    let mut limits = vec!["limit".to_string()];
    limits.extend(t.joints.iter().map(|j| trajectory_csv::format_value(j.limit)));
    w.write_record(&limits).expect("in-memory write");
    for (k, time) in t.times.iter().enumerate() {
        let mut row = vec![trajectory_csv::format_value(*time)];
        row.extend(t.joints.iter().map(|j| trajectory_csv::format_value(j.series[k])));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn collision_csv(hits: &[Penetration]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["leg", "knot", "substep", "t", "body", "fraction", "x", "y", "z", "depth"]).expect("in-memory write");
    for h in hits {
        let body = format!("{:?}", h.body).to_lowercase();
        let mut row = vec![h.leg_name.clone(), h.knot.to_string(), h.substep.to_string()];
        row.push(trajectory_csv::format_value(h.time));
        row.push(body);
        row.extend([h.fraction, h.point[0], h.point[1], h.point[2], h.depth].map(trajectory_csv::format_value));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}
