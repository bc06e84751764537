//! Constraint audit of a finished trajectory.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::model::Trajectory;
use crate::nlp::NlpProblem;

/// Violation above which an audit fails.
pub const AUDIT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub max_violation: f64,
    pub worst_block: Option<String>,
    /// Largest violation per block kind.
    pub per_kind: BTreeMap<String, f64>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= AUDIT_TOL
    }
}

/// Packs `trajectory` into the problem's variable vector and evaluates every
/// constraint block against its bounds, in unscaled units.
pub fn audit(problem: &NlpProblem, trajectory: &Trajectory) -> Result<AuditReport> {
    let x = problem.layout.pack(trajectory)?;
    let mut report = AuditReport { max_violation: 0.0, worst_block: None, per_kind: BTreeMap::new() };
    for (b, block) in problem.blocks.iter().enumerate() {
        let v = block.violation(&block.eval(x.as_slice()));
        let entry = report.per_kind.entry(block.kind.label().to_string()).or_insert(0.0);
        *entry = entry.max(v);
        if v > report.max_violation {
            report.max_violation = v;
            report.worst_block = Some(problem.block_name(b));
        }
    }
    Ok(report)
}
