//! Transcription of the planning problem into a sparse NLP and its solver.

pub mod elements;
pub mod init;
pub mod layout;
pub mod ldl;
pub mod problem;
pub mod solver;
pub mod transcribe;

pub use init::initial_guess;
pub use layout::VariableLayout;
pub use problem::{JacobianReport, NlpProblem};
pub use solver::{solve, Solution, SolveStats, SolveStatus, SolverOptions};
pub use transcribe::{transcribe, BasePose, ProblemOptions, Task, DEFAULT_DT};
