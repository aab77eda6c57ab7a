//! Pivot-accelerated search.
//!
//! Each ad splits its neighbors around a predicted pivot in one linear pass
//! and offers everything above it at once. The fine-tuning rounds then
//! recall from over-subscribed ads and pour from under-subscribed ones until
//! every ad holds exactly `b(a)` reserved edges or has nothing left to offer.
//! Because an ad's live offers are always a best-first prefix of its
//! neighbors, the fixed point is the greedy matching whatever the pivots
//! were.

use std::time::Instant;

use thiserror::Error;

use crate::exec::{with_workers, Exec};
use crate::graph::{BipartiteInstance, EdgeKey, Matching};
use crate::predictors::{PivotPredictor, PredictError};
use crate::state::{AdState, Mode, Remaining, SolverState, Threshold, ThresholdVector};

#[derive(Debug, Error)]
pub enum PivotError {
    #[error("expected {expected} pivots, got {got}")]
    PivotCount { expected: usize, got: usize },
    #[error("predictor `{predictor}` failed: {source}")]
    PredictorFailure {
        predictor: String,
        #[source]
        source: PredictError,
    },
}

/// A pivot for one ad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pivot {
    /// Pour every edge strictly heavier than this weight.
    Weight(f64),
    /// Pour every edge strictly preceding this threshold in canonical order.
    Exact(Threshold),
}

impl Pivot {
    fn pours(&self, key: &EdgeKey) -> bool {
        match self {
            Pivot::Weight(w) => key.weight > *w,
            Pivot::Exact(Threshold::Key(t)) => key.precedes(t),
            Pivot::Exact(Threshold::BelowAll) => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PivotVector(pub Vec<Pivot>);

impl PivotVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&ThresholdVector> for PivotVector {
    fn from(t: &ThresholdVector) -> Self {
        PivotVector(t.iter().map(|&t| Pivot::Exact(t)).collect())
    }
}

/// An ad's neighbors split around its pivot. Neither side is sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedNeighbors {
    pub ad: usize,
    pub poured: Vec<EdgeKey>,
    pub remaining: Vec<EdgeKey>,
}

pub fn partition_by_pivot(
    instance: &BipartiteInstance,
    ad: usize,
    pivot: &Pivot,
) -> PartitionedNeighbors {
    let (poured, remaining) = instance.ad_keys(ad).partition(|k| pivot.pours(k));
    PartitionedNeighbors {
        ad,
        poured,
        remaining,
    }
}

pub fn initial_solution<'g>(
    instance: &'g BipartiteInstance,
    pivots: &PivotVector,
    worker_count: usize,
) -> Result<SolverState<'g>, PivotError> {
    with_workers(worker_count.max(1), |exec| {
        initial_with(instance, pivots, &exec)
    })
}

pub(crate) fn initial_with<'g>(
    instance: &'g BipartiteInstance,
    pivots: &PivotVector,
    exec: &Exec,
) -> Result<SolverState<'g>, PivotError> {
    if pivots.len() != instance.num_ads() {
        return Err(PivotError::PivotCount {
            expected: instance.num_ads(),
            got: pivots.len(),
        });
    }
    let parts = exec.map(&pivots.0, |a, p| partition_by_pivot(instance, a, p));
    let mut batches = Vec::with_capacity(parts.len());
    let mut ads = Vec::with_capacity(parts.len());
    for part in parts {
        ads.push(AdState::new(
            instance.ad_capacity(part.ad),
            Remaining::Unsorted(part.remaining),
        ));
        batches.push(part.poured);
    }
    let mut state = SolverState::new(instance, Mode::Pivot, ads);
    state.offer_initial(exec, batches);
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneOutcome {
    pub matching: Matching,
    pub thresholds: ThresholdVector,
    pub correction_iterations: usize,
}

pub fn fine_tune(state: SolverState<'_>, worker_count: usize) -> FineTuneOutcome {
    with_workers(worker_count.max(1), move |exec| {
        fine_tune_with(state, &exec)
    })
}

pub(crate) fn fine_tune_with(mut state: SolverState<'_>, exec: &Exec) -> FineTuneOutcome {
    let start = state.rounds();
    state.run_to_completion(exec);
    FineTuneOutcome {
        matching: state.matching(),
        thresholds: state
            .extract_thresholds()
            .expect("run_to_completion leaves every ad settled"),
        correction_iterations: state.rounds() - start,
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseTimings {
    pub predict: f64,
    pub initial: f64,
    pub finetune: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotOutcome {
    pub matching: Matching,
    pub thresholds: ThresholdVector,
    pub correction_iterations: usize,
    pub timings: PhaseTimings,
}

/// Predict, build the initial solution, fine-tune.
pub fn solve_pivot(
    instance: &BipartiteInstance,
    predictor: &dyn PivotPredictor,
    worker_count: usize,
) -> Result<PivotOutcome, PivotError> {
    with_workers(worker_count.max(1), |exec| {
        let t0 = Instant::now();
        let prediction =
            predictor
                .predict(instance)
                .map_err(|source| PivotError::PredictorFailure {
                    predictor: predictor.name().to_string(),
                    source,
                })?;
        let t1 = Instant::now();
        let state = initial_with(instance, &prediction.pivots, &exec)?;
        let t2 = Instant::now();
        let out = fine_tune_with(state, &exec);
        let t3 = Instant::now();
        Ok(PivotOutcome {
            matching: out.matching,
            thresholds: out.thresholds,
            correction_iterations: out.correction_iterations,
            timings: PhaseTimings {
                predict: (t1 - t0).as_secs_f64(),
                initial: (t2 - t1).as_secs_f64(),
                finetune: (t3 - t2).as_secs_f64(),
                total: (t3 - t0).as_secs_f64(),
            },
        })
    })
}
