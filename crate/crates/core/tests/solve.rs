use srbd_core::model::{ContactSchedule, RobotModel, TerrainModel, CRAWL_ORDER, GRAVITY};
use srbd_core::nlp::{solve, transcribe, BasePose, ProblemOptions, SolveStatus, SolverOptions, Task};
use srbd_core::validate::{audit, collision_sweep, straddling_footholds, torque_replay};

fn standing_task() -> Task {
    let pose = BasePose::new([0.0, 0.0, 0.5], [0.0; 3]);
    Task { start: pose, goal: pose, final_time: 1.0, dt: 0.1 }
}

fn standing_problem() -> (RobotModel, srbd_core::nlp::NlpProblem) {
    let model = RobotModel::hyq_like();
    let terrain = TerrainModel::flat(0.5, 0.03, 2.0 * model.weight()).unwrap();
    let schedule = ContactSchedule::all_stance(4, 1.0).unwrap();
    let problem = transcribe(&model, &terrain, &schedule, &standing_task(), &ProblemOptions::default()).unwrap();
    (model, problem)
}

#[test]
fn standing_converges_to_even_support() {
    let (model, problem) = standing_problem();
    let opts = SolverOptions { feasibility_tol: 1e-8, ..Default::default() };
    let sol = solve(&problem, &opts).unwrap();
    assert_eq!(sol.stats.status, SolveStatus::Converged);
    assert!(sol.stats.max_violation <= 1e-6);
    let share = model.mass * GRAVITY / 4.0;
    for k in &sol.trajectory.knots {
        for f in &k.forces {
            assert!((f.z - share).abs() <= 0.01 * share, "{f}");
        }
    }
}

#[test]
fn unreachable_tolerance_ends_acceptable() {
    let (_, problem) = standing_problem();
    let opts = SolverOptions { stationarity_tol: 0.0, acceptable_iterations: 3, ..Default::default() };
    let sol = solve(&problem, &opts).unwrap();
    assert_eq!(sol.stats.status, SolveStatus::Acceptable);
    assert!(sol.stats.converged());
    assert!(sol.stats.max_violation <= opts.feasibility_tol);
    assert!(sol.stats.stationarity <= opts.acceptable_tol);
    assert!(sol.require_converged().is_ok());
}

#[test]
fn iteration_cap_is_reported() {
    let (_, problem) = standing_problem();
    let sol = solve(&problem, &SolverOptions { max_iterations: 1, ..Default::default() }).unwrap();
    assert_eq!(sol.stats.status, SolveStatus::MaxIterations);
    assert!(sol.require_converged().is_err());
}

#[test]
fn polytope_keeps_flat_crawl_torques_in_range() {
    let model = RobotModel::hyq_like();
    let terrain = TerrainModel::flat(0.5, 0.03, 2.0 * model.weight()).unwrap();
    let schedule = ContactSchedule::crawl(4, &CRAWL_ORDER, 3, 2.4, 0.2, 0.1).unwrap();
    let task = Task {
        start: BasePose::new([0.0, 0.0, 0.5], [0.0; 3]),
        goal: BasePose::new([1.0, 0.0, 0.5], [0.0; 3]),
        final_time: 2.4,
        dt: 0.1,
    };
    let mut peaks = Vec::new();
    for polytope in [false, true] {
        let opts = ProblemOptions { polytope, regularizer_weight: 0.0, ..Default::default() };
        let problem = transcribe(&model, &terrain, &schedule, &task, &opts).unwrap();
        let sol = solve(&problem, &SolverOptions::default()).unwrap().require_converged().unwrap();
        assert!(audit(&problem, &sol.trajectory).unwrap().passed());
        let rep = torque_replay(&sol.trajectory, &model).unwrap();
        peaks.push((rep.violating().count(), rep.within_margin()));
    }
    assert!(peaks[0].0 >= 1);
    assert!(peaks[1].1);
}

#[test]
fn shin_constraint_clears_pallet_edge() {
    let model = RobotModel::hyq_like();
    let terrain = TerrainModel::pallet(0.1, 0.33, 0.5, 0.03, 2.0 * model.weight(), 0.03).unwrap();
    let schedule = ContactSchedule::crawl(4, &CRAWL_ORDER, 3, 11.0, 0.6, 0.1).unwrap();
    let task = Task {
        start: BasePose::new([0.0, 0.0, 0.55], [0.0; 3]),
        goal: BasePose::new([1.0, 0.0, 0.55], [0.0; 3]),
        final_time: 11.0,
        dt: 0.1,
    };
    let problem = transcribe(&model, &terrain, &schedule, &task, &ProblemOptions::default()).unwrap();
    let sol = solve(&problem, &SolverOptions::default()).unwrap().require_converged().unwrap();
    let sharp = terrain.sharp();
    // at the knots the shin blocks alone guarantee clearance of the sharp edge
    assert!(collision_sweep(&sol.trajectory, &sharp, &model, 1, 2).is_empty());
    assert!(collision_sweep(&sol.trajectory, &sharp, &model, 4, 2).is_empty());
    assert!(straddling_footholds(&sol.trajectory, &sharp, model.foot_radius).is_empty());
    assert!(audit(&problem, &sol.trajectory).unwrap().passed());
}
