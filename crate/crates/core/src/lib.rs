//! Maximum-weight bipartite b-matching.
//!
//! Three solvers produce the same greedy matching under the canonical edge
//! order ([`EdgeKey`]):
//!
//! * [`solve_serial_greedy`] sorts every edge once and scans;
//! * [`solve_bsuitor`] lets ads pour their sorted neighbors into bounded
//!   consumer offer sets in barrier-synchronized rounds;
//! * [`solve_pivot`] skips the sort: each ad partitions its neighbors around
//!   a predicted threshold, offers the heavy side at once, then corrects with
//!   recall/pour rounds until the greedy matching is reached.
//!
//! With the default `parallel` feature, rounds run on a rayon pool of the
//! requested size. Without it, every solver runs on the calling thread.

pub mod bench;
pub mod exact;
mod exec;
pub mod gen;
pub mod graph;
pub mod io;
pub mod pivot;
pub mod predictors;
pub mod solvers;
pub mod state;

pub use exact::{solve_exact, ExactError, ExactLimits, ExactResult};
pub use gen::{generate, perturb, DegreeDist, GenError, GeneratorConfig, WeightDist};
pub use graph::{
    canonical_edge_compare, fig1_instance, verify_feasible, BipartiteInstance, CapacityRule,
    EdgeKey, FeasibilityReport, GraphError, Matching, RawEdge, Side, Violation,
};
pub use pivot::{
    fine_tune, initial_solution, partition_by_pivot, solve_pivot, FineTuneOutcome,
    PartitionedNeighbors, PhaseTimings, Pivot, PivotError, PivotOutcome, PivotVector,
};
pub use predictors::{
    file_predictor, oracle_predictor, quantile_predictor, warmstart_predictor, FilePredictor,
    FixedPredictor, OraclePredictor, PivotPrediction, PivotPredictor, PredictError, PredictorKind,
    QuantilePredictor, WarmStartPredictor,
};
pub use solvers::{solve_bsuitor, solve_serial_greedy, SuitorOutcome};
pub use state::{SolveError, SolverState, Threshold, ThresholdVector};
