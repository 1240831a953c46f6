//! Concolic tester for higher-order programs: the search driver, the SMT
//! solver bridge, the corpus harness, and report formatting. The
//! language, evaluators, and mutation machinery live in `hoconc-core`.

pub mod corpus;
pub mod report;
pub mod search;
pub mod solver;

pub use search::{run, run_full, Report, RunOutput, RunStats, SearchConfig};
pub use solver::{Solver, SolverConfig, SolverError};
