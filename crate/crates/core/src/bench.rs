//! Solver runs with machine-readable reports and multi-solver comparison.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{solve_exact, ExactError, ExactLimits};
use crate::graph::{BipartiteInstance, Matching};
use crate::io::instance_digest;
use crate::pivot::{solve_pivot, PhaseTimings, PivotError};
use crate::predictors::{
    FilePredictor, OraclePredictor, PivotPredictor, QuantilePredictor, WarmStartPredictor,
};
use crate::solvers::{solve_bsuitor, solve_serial_greedy};
use crate::state::ThresholdVector;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Pivot(#[from] PivotError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("predictor `{0}` needs {1}")]
    MissingInput(&'static str, &'static str),
    #[error("{instance}: {algo} matched a different edge set (value {got}) than {reference} (value {expected})")]
    ValueMismatch {
        instance: String,
        reference: String,
        algo: String,
        expected: f64,
        got: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorChoice {
    Oracle,
    Warmstart,
    Quantile,
    File,
}

impl PredictorChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorChoice::Oracle => "oracle",
            PredictorChoice::Warmstart => "warmstart",
            PredictorChoice::Quantile => "quantile",
            PredictorChoice::File => "file",
        }
    }
}

impl FromStr for PredictorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(PredictorChoice::Oracle),
            "warmstart" => Ok(PredictorChoice::Warmstart),
            "quantile" => Ok(PredictorChoice::Quantile),
            "file" => Ok(PredictorChoice::File),
            _ => Err(format!(
                "unknown predictor `{s}` (oracle | warmstart | quantile | file)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Greedy,
    BSuitor,
    Pivot(PredictorChoice),
    Exact,
}

impl Algo {
    pub fn solver_name(&self) -> &'static str {
        match self {
            Algo::Greedy => "greedy",
            Algo::BSuitor => "bsuitor",
            Algo::Pivot(_) => "pivot",
            Algo::Exact => "exact",
        }
    }

    pub fn predictor(&self) -> Option<PredictorChoice> {
        match self {
            Algo::Pivot(p) => Some(*p),
            _ => None,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algo::Pivot(p) => write!(f, "pivot:{}", p.as_str()),
            other => f.write_str(other.solver_name()),
        }
    }
}

impl FromStr for Algo {
    type Err = String;

    /// `greedy`, `bsuitor`, `exact` or `pivot:<predictor>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("pivot", p)) => Ok(Algo::Pivot(p.parse()?)),
            None => match s {
                "greedy" => Ok(Algo::Greedy),
                "bsuitor" => Ok(Algo::BSuitor),
                "exact" => Ok(Algo::Exact),
                "pivot" => Ok(Algo::Pivot(PredictorChoice::Quantile)),
                _ => Err(format!("unknown algorithm `{s}`")),
            },
            _ => Err(format!("unknown algorithm `{s}`")),
        }
    }
}

/// Inputs some predictors need.
#[derive(Debug, Clone, Default)]
pub struct RunInputs {
    pub warm: Option<ThresholdVector>,
    pub pivots_file: Option<PathBuf>,
    pub exact_limits: ExactLimits,
    pub seed: Option<u64>,
}

/// One solver run. Everything except `timings` is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance_digest: String,
    pub solver: String,
    pub predictor: Option<String>,
    pub matching_value: f64,
    pub matched_edges: usize,
    /// Pour rounds for b-suitor, correction rounds for pivot search, search
    /// nodes for the exact solver, 0 for greedy.
    pub iterations: u64,
    pub timings: PhaseTimings,
    pub worker_count: usize,
    pub seed: Option<u64>,
}

impl RunReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub matching: Matching,
    pub thresholds: Option<ThresholdVector>,
    pub report: RunReport,
}

fn predictor_for(
    choice: PredictorChoice,
    inputs: &RunInputs,
) -> Result<Box<dyn PivotPredictor>, BenchError> {
    Ok(match choice {
        PredictorChoice::Oracle => Box::new(OraclePredictor),
        PredictorChoice::Quantile => Box::new(QuantilePredictor),
        PredictorChoice::Warmstart => {
            Box::new(WarmStartPredictor::new(inputs.warm.clone().ok_or(
                BenchError::MissingInput("warmstart", "a threshold file (--warm)"),
            )?))
        }
        PredictorChoice::File => Box::new(FilePredictor {
            path: inputs.pivots_file.clone().ok_or(BenchError::MissingInput(
                "file",
                "a prediction file (--pivots)",
            ))?,
        }),
    })
}

pub fn run(
    instance: &BipartiteInstance,
    algo: Algo,
    workers: usize,
    inputs: &RunInputs,
) -> Result<RunOutcome, BenchError> {
    let start = Instant::now();
    let (matching, thresholds, iterations, mut timings) = match algo {
        Algo::Greedy => {
            let (m, t) = solve_serial_greedy(instance);
            (m, Some(t), 0, PhaseTimings::default())
        }
        Algo::BSuitor => {
            let out = solve_bsuitor(instance, workers);
            (
                out.matching,
                Some(out.thresholds),
                out.iterations as u64,
                PhaseTimings::default(),
            )
        }
        Algo::Pivot(choice) => {
            let predictor = predictor_for(choice, inputs)?;
            let out = solve_pivot(instance, predictor.as_ref(), workers)?;
            (
                out.matching,
                Some(out.thresholds),
                out.correction_iterations as u64,
                out.timings,
            )
        }
        Algo::Exact => {
            let out = solve_exact(instance, inputs.exact_limits)?;
            (
                out.optimal_matching,
                None,
                out.node_count,
                PhaseTimings::default(),
            )
        }
    };
    timings.total = start.elapsed().as_secs_f64();
    let report = RunReport {
        instance_digest: instance_digest(instance),
        solver: algo.solver_name().to_string(),
        predictor: algo.predictor().map(|p| p.as_str().to_string()),
        matching_value: matching.total_weight(),
        matched_edges: matching.len(),
        iterations,
        timings,
        worker_count: workers,
        seed: inputs.seed,
    };
    Ok(RunOutcome {
        matching,
        thresholds,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub instance: String,
    pub algo: Algo,
    /// `None` when the run failed (e.g. exact search over budget).
    pub report: Option<RunReport>,
    pub note: Option<String>,
    /// greedy value / optimal value, when an exact run is in the set.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub instance: String,
    pub reference: Algo,
    pub algo: Algo,
    pub expected: f64,
    pub got: f64,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} value {} differs from {} value {}",
            self.instance, self.algo, self.got, self.reference, self.expected
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub mismatches: Vec<Mismatch>,
}

impl ComparisonTable {
    /// Fails if any approximate solver disagreed with the others.
    pub fn check(&self) -> Result<(), BenchError> {
        match self.mismatches.first() {
            None => Ok(()),
            Some(m) => Err(BenchError::ValueMismatch {
                instance: m.instance.clone(),
                reference: m.reference.to_string(),
                algo: m.algo.to_string(),
                expected: m.expected,
                got: m.got,
            }),
        }
    }

    pub fn reports(&self) -> impl Iterator<Item = &RunReport> {
        self.rows.iter().filter_map(|r| r.report.as_ref())
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:<16} {:>18} {:>10} {:>12} {:>8}",
            "instance", "algo", "value", "iters", "time_s", "ratio"
        )?;
        for row in &self.rows {
            match &row.report {
                Some(r) => writeln!(
                    f,
                    "{:<24} {:<16} {:>18.6} {:>10} {:>12.6} {:>8}",
                    row.instance,
                    row.algo.to_string(),
                    r.matching_value,
                    r.iterations,
                    r.timings.total,
                    row.ratio.map_or("-".to_string(), |x| format!("{x:.4}")),
                )?,
                None => writeln!(
                    f,
                    "{:<24} {:<16} {:>18} ({})",
                    row.instance,
                    row.algo.to_string(),
                    "skipped",
                    row.note.as_deref().unwrap_or("")
                )?,
            }
        }
        for m in &self.mismatches {
            writeln!(f, "MISMATCH {m}")?;
        }
        Ok(())
    }
}

/// Runs every algorithm on every instance and cross-checks the matched edge
/// sets of all non-exact solvers.
pub fn compare(
    instances: &[(String, BipartiteInstance)],
    algos: &[Algo],
    workers: usize,
    inputs: &RunInputs,
) -> Result<ComparisonTable, BenchError> {
    let mut table = ComparisonTable::default();
    for (name, instance) in instances {
        let mut reference: Option<(Algo, Matching)> = None;
        let mut rows = Vec::with_capacity(algos.len());
        let mut exact_value = None;
        let mut approx_value = None;
        for &algo in algos {
            let outcome = match run(instance, algo, workers, inputs) {
                Ok(o) => o,
                Err(BenchError::Exact(e)) => {
                    rows.push(ComparisonRow {
                        instance: name.clone(),
                        algo,
                        report: None,
                        note: Some(e.to_string()),
                        ratio: None,
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            if algo == Algo::Exact {
                exact_value = Some(outcome.matching.total_weight());
            } else {
                approx_value = Some(outcome.matching.total_weight());
                match &reference {
                    None => reference = Some((algo, outcome.matching.clone())),
                    Some((ref_algo, ref_m)) if *ref_m != outcome.matching => {
                        table.mismatches.push(Mismatch {
                            instance: name.clone(),
                            reference: *ref_algo,
                            algo,
                            expected: ref_m.total_weight(),
                            got: outcome.matching.total_weight(),
                        });
                    }
                    Some(_) => {}
                }
            }
            rows.push(ComparisonRow {
                instance: name.clone(),
                algo,
                report: Some(outcome.report),
                note: None,
                ratio: None,
            });
        }
        if let (Some(opt), Some(approx)) = (exact_value, approx_value) {
            let ratio = if opt > 0.0 { approx / opt } else { 1.0 };
            for row in rows
                .iter_mut()
                .filter(|r| r.algo != Algo::Exact && r.report.is_some())
            {
                row.ratio = Some(ratio);
            }
        }
        table.rows.extend(rows);
    }
    Ok(table)
}
