use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use srbd_cli::commands::{self, PolytopeGrid, EXIT_INPUT, EXIT_OK, EXIT_VALIDATION};
use srbd_cli::config::load_robot;
use srbd_cli::{CliResult, Overrides, Scenario};

/// Single-rigid-body trajectory planner with force-polytope and
/// leg-collision constraints. Log verbosity follows `SRBD_LOG`
/// (error, warn, info, debug, trace; default info).
///
/// Exit codes: 0 success, 1 solver did not converge, 2 a validator failed,
/// 3 unreadable input.
#[derive(Parser)]
#[command(name = "srbd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Toggles {
    /// Drop the force-polytope constraints.
    #[arg(long)]
    no_polytope: bool,
    /// Drop the shin clearance constraints.
    #[arg(long)]
    no_shin: bool,
    /// Drop the foot-radius constraints.
    #[arg(long)]
    no_foot_radius: bool,
}

impl From<Toggles> for Overrides {
    fn from(t: Toggles) -> Self {
        Overrides { no_polytope: t.no_polytope, no_shin: t.no_shin, no_foot_radius: t.no_foot_radius }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve scenarios and validate the results.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        toggles: Toggles,
        /// Scenarios solved concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Artifact directory; one subdirectory per scenario when several are given.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Validate an existing trajectory.csv against a scenario.
    Check {
        trajectory: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        toggles: Toggles,
        /// Where report.json goes; the trajectory's directory by default.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write morphed and exact force polytopes over a (l, α) grid.
    PolytopeDump {
        /// Scenario or robot source; the built-in robot when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Leg name or index.
        #[arg(long, default_value = "LF")]
        leg: String,
        #[arg(long, default_value_t = 10)]
        l_count: usize,
        #[arg(long, default_value_t = 5)]
        alpha_count: usize,
        #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
        alpha_min: f64,
        #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
        alpha_max: f64,
        /// Explicit `l,alpha` sample; replaces the grid when given.
        #[arg(long = "sample", value_parser = parse_sample, allow_hyphen_values = true)]
        samples: Vec<(f64, f64)>,
        #[arg(long, default_value = "out/polytopes")]
        out_dir: PathBuf,
    },
    /// Compare every analytic Jacobian block with central differences.
    JacobianCheck {
        config: PathBuf,
        #[command(flatten)]
        toggles: Toggles,
        /// Evaluation points: the initial guess plus random perturbations.
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_sample(s: &str) -> Result<(f64, f64), String> {
    let (l, a) = s.split_once(',').ok_or("expected `l,alpha`")?;
    Ok((l.trim().parse().map_err(|e| format!("{e}"))?, a.trim().parse().map_err(|e| format!("{e}"))?))
}

fn run_one(config: &Path, overrides: Overrides, out_dir: Option<&Path>) -> CliResult<i32> {
    let scenario = Scenario::load(config)?;
    let outcome = commands::run(&scenario, overrides, out_dir)?;
    let v = &outcome.report.validation;
    println!(
        "{}: exit {} ({} collisions, {} straddles) -> {}",
        scenario.config.name,
        outcome.code,
        v.collisions.len(),
        v.straddles.len(),
        outcome.out_dir.display()
    );
    Ok(outcome.code)
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run { configs, toggles, jobs, out_dir } => {
            let overrides = Overrides::from(toggles);
            let several = configs.len() > 1;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
            let codes: Vec<i32> = pool.install(|| {
                configs
                    .par_iter()
                    .map(|c| {
                        let dir = out_dir.as_ref().map(|d| {
                            if several {
                                d.join(c.file_stem().unwrap_or_default())
                            } else {
                                d.clone()
                            }
                        });
                        run_one(c, overrides, dir.as_deref()).unwrap_or_else(|e| {
                            log::error!("{e}");
                            EXIT_INPUT
                        })
                    })
                    .collect()
            });
            Ok(codes.into_iter().max().unwrap_or(EXIT_OK))
        }
        Command::Check { trajectory, config, toggles, out_dir } => {
            let scenario = Scenario::load(&config)?;
            let outcome = commands::check(&scenario, &trajectory, toggles.into(), out_dir.as_deref())?;
            println!("{}: {}", scenario.config.name, if outcome.code == EXIT_OK { "pass" } else { "FAIL" });
            for f in &outcome.report.validation.failures {
                println!("  {f}");
            }
            Ok(outcome.code)
        }
        Command::PolytopeDump { config, leg, l_count, alpha_count, alpha_min, alpha_max, samples, out_dir } => {
            let model = match &config {
                Some(c) => Scenario::load(c)?.model,
                None => load_robot(None)?,
            };
            let index = model
                .legs
                .iter()
                .position(|l| l.name == leg)
                .or_else(|| leg.parse().ok().filter(|i| *i < model.leg_count()))
                .ok_or_else(|| srbd_cli::CliError::Config(format!("unknown leg `{leg}`")))?;
            let grid = if samples.is_empty() {
                let d = model.legs[index].polytopes.distances;
                PolytopeGrid::regular((d[0], d[2]), l_count, (alpha_min, alpha_max), alpha_count)
            } else {
                PolytopeGrid { samples }
            };
            let result = commands::polytope_dump(&model, index, &grid, &out_dir)?;
            let worst = result.iter().map(|s| s.deviation.max_angle.to_degrees()).fold(0.0, f64::max);
            let worst_d = result.iter().map(|s| s.deviation.max_offset_rel).fold(0.0, f64::max);
            println!(
                "{} samples, worst facet angle {worst:.2}°, worst offset {:.1}% -> {}",
                result.len(),
                100.0 * worst_d,
                out_dir.display()
            );
            Ok(EXIT_OK)
        }
        Command::JacobianCheck { config, toggles, samples, seed, step, out_dir } => {
            let scenario = Scenario::load(&config)?;
            let problem = commands::build_problem(&scenario, toggles.into())?;
            let reports = commands::jacobian_check(&problem, samples.max(1), seed, step);
            let json = serde_json::to_string_pretty(&reports).expect("report serializes");
            match out_dir {
                Some(d) => {
                    std::fs::create_dir_all(&d).map_err(|e| srbd_cli::CliError::io(&d, e))?;
                    let p = d.join("jacobians.json");
                    std::fs::write(&p, json).map_err(|e| srbd_cli::CliError::io(&p, e))?;
                }
                None => println!("{json}"),
            }
            for r in &reports {
                for b in &r.blocks {
                    log::info!("{:<20} {:>6} blocks  max rel error {:.2e}", b.kind.label(), b.blocks, b.max_rel_error);
                }
            }
            Ok(if commands::jacobians_pass(&reports) { EXIT_OK } else { EXIT_VALIDATION })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SRBD_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = dispatch(cli).unwrap_or_else(|e| {
        log::error!("{e}");
        EXIT_INPUT
    });
    ExitCode::from(code as u8)
}
