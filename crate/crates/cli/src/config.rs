//! Scenario files.
//!
//! A scenario is a TOML document with a mandatory `schema_version` key.
//! Version 1 layout:
//!
//! ```toml
//! schema_version = 1
//! name = "pallet10_baseline"
//! robot = "robots/hyq_like.toml"   # relative to this file; built-in HyQ-like robot when absent
//! output_dir = "out/pallet10"      # relative to the working directory
//!
//! [terrain]
//! kind = "pallet"                  # flat | pallet | samples
//! height = 0.10
//! edge_x = 0.33
//! friction = 0.5
//! min_clearance = 0.03
//! smoothing = 0.03
//! # force_cap defaults to twice the robot weight
//!
//! [task]
//! final_time = 11.0
//! dt = 0.1
//! start = { position = [0.0, 0.0, 0.5], orientation = [0.0, 0.0, 0.0] }
//! goal = { position = [1.0, 0.0, 0.55], orientation = [0.0, 0.0, 0.0] }
//! gait = { kind = "crawl", cycles = 3, swing_duration = 0.6 }
//!
//! [constraints]                    # every key optional
//! polytope = true
//! shin = false
//! foot_radius = false
//!
//! [solver]                         # every key optional
//! max_iterations = 500
//!
//! [validation]                     # every key optional
//! substeps = 4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srbd_core::model::terrain::HeightField;
use srbd_core::model::{ContactSchedule, RobotModel, RobotParams, TerrainModel, CRAWL_ORDER};
use srbd_core::nlp::{BasePose, ProblemOptions, SolverOptions, Task, DEFAULT_DT};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub robot: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub terrain: TerrainConfig,
    pub task: TaskConfig,
    #[serde(default)]
    pub constraints: ProblemOptions,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub validation: ValidationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainConfig {
    #[serde(flatten)]
    pub field: HeightField,
    #[serde(default = "default_friction")]
    pub friction: f64,
    #[serde(default = "default_clearance")]
    pub min_clearance: f64,
    #[serde(default)]
    pub force_cap: Option<f64>,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

fn default_friction() -> f64 {
    0.5
}

fn default_clearance() -> f64 {
    0.03
}

fn default_smoothing() -> f64 {
    0.01
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub start: BasePose,
    pub goal: BasePose,
    pub final_time: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub gait: GaitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaitConfig {
    /// All feet on the ground throughout.
    Stand,
    Crawl {
        cycles: usize,
        swing_duration: f64,
        /// Swing order by leg index; LH, LF, RH, RF when absent.
        #[serde(default)]
        order: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Interpolation points per knot interval of the collision sweep.
    pub substeps: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { substeps: 4 }
    }
}

/// Constraint switches given on the command line; each one only turns a
/// family off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub no_polytope: bool,
    pub no_shin: bool,
    pub no_foot_radius: bool,
}

impl Overrides {
    pub fn apply(&self, options: &mut ProblemOptions) {
        options.polytope &= !self.no_polytope;
        options.shin &= !self.no_shin;
        options.foot_radius &= !self.no_foot_radius;
    }
}

/// A parsed scenario with its model objects built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: RobotModel,
    pub terrain: TerrainModel,
    pub schedule: ContactSchedule,
    pub task: Task,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_integer()) {
            Some(v) if v == SCHEMA_VERSION as i64 => {}
            Some(v) => return Err(CliError::Config(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(CliError::Config("missing integer key `schema_version`".into())),
        }
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }
}

pub fn load_robot(path: Option<&Path>) -> CliResult<RobotModel> {
    let params = match path {
        None => RobotParams::hyq_like(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("robot file {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("robot file {}: {e}", p.display())))?
        }
    };
    Ok(RobotModel::new(&params)?)
}

impl Scenario {
    /// Reads and checks a scenario file. Relative robot paths resolve
    /// against the scenario's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = ScenarioConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(robot) = &config.robot {
            let base = path.parent().unwrap_or(Path::new("."));
            config.robot = Some(base.join(robot));
        }
        Self::from_config(config)
    }

    pub fn from_config(config: ScenarioConfig) -> CliResult<Self> {
        if let Some(robot) = &config.robot {
            if !robot.is_file() {
                return Err(CliError::Config(format!("robot file {} does not exist", robot.display())));
            }
        }
        if !(config.task.final_time > 0.0) {
            return Err(CliError::Config("task.final_time must be > 0".into()));
        }
        if !(config.task.dt > 0.0) {
            return Err(CliError::Config("task.dt must be > 0".into()));
        }
        let model = load_robot(config.robot.as_deref())?;
        let t = &config.terrain;
        let terrain =
            TerrainModel::new(t.field.clone(), t.friction, t.min_clearance, t.force_cap.unwrap_or(2.0 * model.weight()), t.smoothing)?;
        let legs = model.leg_count();
        let schedule = match &config.task.gait {
            GaitConfig::Stand => ContactSchedule::all_stance(legs, config.task.final_time)?,
            GaitConfig::Crawl { cycles, swing_duration, order } => ContactSchedule::crawl(
                legs,
                order.as_deref().unwrap_or(&CRAWL_ORDER),
                *cycles,
                config.task.final_time,
                *swing_duration,
                config.task.dt,
            )?,
        };
        let task = Task { start: config.task.start, goal: config.task.goal, final_time: config.task.final_time, dt: config.task.dt };
        Ok(Scenario { config, model, terrain, schedule, task })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.config.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&self.config.name))
    }
}
