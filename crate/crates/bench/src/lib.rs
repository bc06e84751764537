//! Fixtures shared by the benchmarks.

use srbd_core::model::{ContactSchedule, RobotModel, TerrainModel, CRAWL_ORDER};
use srbd_core::nlp::{transcribe, BasePose, NlpProblem, ProblemOptions, Task};

/// 1 m crawl on flat ground, 2.4 s, three cycles.
pub fn flat_crawl(options: &ProblemOptions) -> NlpProblem {
    let model = RobotModel::hyq_like();
    let terrain = TerrainModel::flat(0.5, 0.03, 2.0 * model.weight()).expect("valid terrain");
    let schedule = ContactSchedule::crawl(4, &CRAWL_ORDER, 3, 2.4, 0.2, 0.1).expect("valid schedule");
    let task = Task {
        start: BasePose::new([0.0, 0.0, 0.5], [0.0; 3]),
        goal: BasePose::new([1.0, 0.0, 0.5], [0.0; 3]),
        final_time: 2.4,
        dt: 0.1,
    };
    transcribe(&model, &terrain, &schedule, &task, options).expect("valid problem")
}

/// Crawl onto a 10 cm pallet, 11 s, three cycles.
pub fn pallet(options: &ProblemOptions) -> NlpProblem {
    let model = RobotModel::hyq_like();
    let terrain = TerrainModel::pallet(0.1, 0.33, 0.5, 0.03, 2.0 * model.weight(), 0.03).expect("valid terrain");
    let schedule = ContactSchedule::crawl(4, &CRAWL_ORDER, 3, 11.0, 0.6, 0.1).expect("valid schedule");
    let task = Task {
        start: BasePose::new([0.0, 0.0, 0.5], [0.0; 3]),
        goal: BasePose::new([1.0, 0.0, 0.55], [0.0; 3]),
        final_time: 11.0,
        dt: 0.1,
    };
    transcribe(&model, &terrain, &schedule, &task, options).expect("valid problem")
}
