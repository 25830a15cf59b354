//! Choosing which tasks should share a network under an inference-time
//! budget.
//!
//! Given candidate networks (each solving a subset of the tasks at some
//! cost, with a loss per task) the crate finds the covering set of networks
//! with the lowest total loss whose summed cost fits a budget, where each
//! task is scored by the best network in the set that solves it.
//!
//! * [`model`]: task sets, candidate networks, tables and solution scoring.
//! * [`solver`]: exact branch and bound, an exhaustive oracle, pessimal and
//!   random baselines, budget sweeps.
//! * [`approx`]: higher-order prediction from pair networks, proxy-table
//!   selection and training-effort accounting.
//! * [`analysis`]: relative-performance matrices, affinities and Pearson
//!   correlation.
//! * [`fixtures`]: published relationship tables.
//! * [`io`]: table and matrix file formats.
//! * [`synth`]: seeded synthetic tables.
//!
//! ```
//! use taskgroup::model::{CandidateNetwork, PerformanceTable, TaskSet};
//! use taskgroup::solver::{solve_optimal, Budget};
//!
//! let tasks = TaskSet::new(["s", "d"]).unwrap();
//! let table = PerformanceTable::new(
//!     tasks,
//!     vec![
//!         CandidateNetwork::new("sd@1000", 1000, [("s", 0.4), ("d", 0.5)]).unwrap(),
//!         CandidateNetwork::new("s@500", 500, [("s", 0.3)]).unwrap(),
//!         CandidateNetwork::new("d@500", 500, [("d", 0.6)]).unwrap(),
//!     ],
//! )
//! .unwrap();
//! let best = solve_optimal(&table, Budget::from_msnt(1500).unwrap()).unwrap();
//! assert_eq!(best.network_ids, vec!["s@500", "sd@1000"]);
//! ```

pub mod analysis;
pub mod approx;
pub mod fixtures;
pub mod io;
pub mod model;
pub mod solver;
pub mod synth;

pub use model::{CandidateNetwork, PerformanceTable, Solution, TaskSet};
pub use solver::{Budget, SolveError};
