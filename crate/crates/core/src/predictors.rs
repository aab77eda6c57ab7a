//! Pivot sources.
//!
//! Every predictor is safe to use with the pivot search: a wrong pivot only
//! costs extra correction rounds, never a different matching.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BipartiteInstance, EdgeKey};
use crate::io::{parse_pivots, FormatError};
use crate::pivot::{Pivot, PivotVector};
use crate::solvers::solve_bsuitor;
use crate::state::ThresholdVector;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("previous thresholds cover {previous} ads but the instance has {current}")]
    AdIdMismatch { previous: usize, current: usize },
    #[error("id map sends ad {ad} to {mapped}, outside the previous {previous} ads")]
    IdMapOutOfRange {
        ad: usize,
        mapped: usize,
        previous: usize,
    },
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("no usable pivot for ads {ads:?}")]
    MissingAds { ads: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Oracle,
    Warmstart,
    Quantile,
    File,
    Fixed,
}

impl PredictorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorKind::Oracle => "oracle",
            PredictorKind::Warmstart => "warmstart",
            PredictorKind::Quantile => "quantile",
            PredictorKind::File => "file",
            PredictorKind::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PivotPrediction {
    pub pivots: PivotVector,
    pub source: PredictorKind,
}

pub trait PivotPredictor: Sync {
    fn name(&self) -> &str;
    fn predict(&self, instance: &BipartiteInstance) -> Result<PivotPrediction, PredictError>;
}

/// Maps missing or nonsensical raw weights to 0, which pours everything.
fn sanitize(w: f64) -> f64 {
    if w.is_nan() || w < 0.0 {
        0.0
    } else {
        w
    }
}

/// Exact thresholds from a b-suitor run on the instance itself.
pub fn oracle_predictor(instance: &BipartiteInstance) -> PivotPrediction {
    let thresholds = solve_bsuitor(instance, 1).thresholds;
    PivotPrediction {
        pivots: PivotVector::from(&thresholds),
        source: PredictorKind::Oracle,
    }
}

/// Raw-weight pivots copied from a previous solve. `id_map[a]` names the
/// previous ad that current ad `a` corresponds to; without a map the ids
/// must line up one to one.
pub fn warmstart_predictor(
    previous: &ThresholdVector,
    num_ads: usize,
    id_map: Option<&[usize]>,
) -> Result<PivotPrediction, PredictError> {
    let pivots = match id_map {
        None => {
            if previous.len() != num_ads {
                return Err(PredictError::AdIdMismatch {
                    previous: previous.len(),
                    current: num_ads,
                });
            }
            previous
                .iter()
                .map(|t| Pivot::Weight(sanitize(t.raw_weight())))
                .collect()
        }
        Some(map) => {
            if map.len() != num_ads {
                return Err(PredictError::AdIdMismatch {
                    previous: map.len(),
                    current: num_ads,
                });
            }
            map.iter()
                .enumerate()
                .map(|(ad, &old)| {
                    previous
                        .get(old)
                        .map(|t| Pivot::Weight(sanitize(t.raw_weight())))
                        .ok_or(PredictError::IdMapOutOfRange {
                            ad,
                            mapped: old,
                            previous: previous.len(),
                        })
                })
                .collect::<Result<_, _>>()?
        }
    };
    Ok(PivotPrediction {
        pivots: PivotVector(pivots),
        source: PredictorKind::Warmstart,
    })
}

/// Pivot at the weight of each ad's `(b(a)+1)`-th best neighbor, found by
/// linear-time selection; 0 when the ad has at most `b(a)` neighbors.
pub fn quantile_predictor(instance: &BipartiteInstance) -> PivotPrediction {
    let pivots = (0..instance.num_ads())
        .map(|a| {
            let cap = instance.ad_capacity(a);
            if instance.ad_degree(a) <= cap {
                return Pivot::Weight(0.0);
            }
            let mut keys: Vec<EdgeKey> = instance.ad_keys(a).collect();
            let (_, nth, _) = keys.select_nth_unstable(cap);
            Pivot::Weight(nth.weight)
        })
        .collect();
    PivotPrediction {
        pivots: PivotVector(pivots),
        source: PredictorKind::Quantile,
    }
}

/// Raw-weight pivots from a `.piv` file. Ads without an entry get 0.
pub fn file_predictor(
    path: &Path,
    instance: &BipartiteInstance,
) -> Result<PivotPrediction, PredictError> {
    let text = std::fs::read_to_string(path).map_err(|source| PredictError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed = parse_pivots(&text).map_err(|source| PredictError::Format {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pivots = vec![Pivot::Weight(0.0); instance.num_ads()];
    for (line, ad, w) in parsed {
        match pivots.get_mut(ad) {
            Some(slot) => *slot = Pivot::Weight(sanitize(w)),
            None => log::warn!(
                "{}:{line}: unknown ad id {ad} (instance has {}), entry ignored",
                path.display(),
                instance.num_ads()
            ),
        }
    }
    Ok(PivotPrediction {
        pivots: PivotVector(pivots),
        source: PredictorKind::File,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePredictor;

impl PivotPredictor for OraclePredictor {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, instance: &BipartiteInstance) -> Result<PivotPrediction, PredictError> {
        Ok(oracle_predictor(instance))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct QuantilePredictor;

impl PivotPredictor for QuantilePredictor {
    fn name(&self) -> &str {
        "quantile"
    }

    fn predict(&self, instance: &BipartiteInstance) -> Result<PivotPrediction, PredictError> {
        Ok(quantile_predictor(instance))
    }
}

#[derive(Debug, Clone)]
pub struct WarmStartPredictor {
    pub previous: ThresholdVector,
    pub id_map: Option<Vec<usize>>,
}

impl WarmStartPredictor {
    pub fn new(previous: ThresholdVector) -> Self {
        WarmStartPredictor {
            previous,
            id_map: None,
        }
    }
}

impl PivotPredictor for WarmStartPredictor {
    fn name(&self) -> &str {
        "warmstart"
    }

    fn predict(&self, instance: &BipartiteInstance) -> Result<PivotPrediction, PredictError> {
        warmstart_predictor(&self.previous, instance.num_ads(), self.id_map.as_deref())
    }
}

#[derive(Debug, Clone)]
pub struct FilePredictor {
    pub path: PathBuf,
}

impl PivotPredictor for FilePredictor {
    fn name(&self) -> &str {
        "file"
    }

    fn predict(&self, instance: &BipartiteInstance) -> Result<PivotPrediction, PredictError> {
        file_predictor(&self.path, instance)
    }
}

/// A fixed pivot vector, mostly for experiments and tests.
#[derive(Debug, Clone)]
pub struct FixedPredictor(pub PivotVector);

impl PivotPredictor for FixedPredictor {
    fn name(&self) -> &str {
        "fixed"
    }

    fn predict(&self, instance: &BipartiteInstance) -> Result<PivotPrediction, PredictError> {
        if self.0.len() != instance.num_ads() {
            let ads = (self.0.len()..instance.num_ads()).collect();
            return Err(PredictError::MissingAds { ads });
        }
        Ok(PivotPrediction {
            pivots: self.0.clone(),
            source: PredictorKind::Fixed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{fig1_instance, CapacityRule, RawEdge};
    use crate::pivot::solve_pivot;
    use crate::solvers::solve_serial_greedy;
    use crate::state::Threshold;

    #[test]
    fn oracle_on_fig1() {
        let p = oracle_predictor(&fig1_instance());
        assert_eq!(
            p.pivots.0,
            vec![
                Pivot::Exact(Threshold::Key(EdgeKey::new(2.0, 0, 3))),
                Pivot::Exact(Threshold::Key(EdgeKey::new(3.0, 1, 0))),
            ]
        );
        let empty = BipartiteInstance::build(0, 0, &[], CapacityRule::HalfDegree).unwrap();
        assert!(oracle_predictor(&empty).pivots.is_empty());
    }

    #[test]
    fn warmstart_copies_weights() {
        let prev = ThresholdVector(vec![
            Threshold::Key(EdgeKey::new(2.0, 0, 3)),
            Threshold::Key(EdgeKey::new(3.0, 1, 0)),
        ]);
        let p = warmstart_predictor(&prev, 2, None).unwrap();
        assert_eq!(p.pivots.0, vec![Pivot::Weight(2.0), Pivot::Weight(3.0)]);
        let p = warmstart_predictor(&ThresholdVector(vec![Threshold::BelowAll]), 1, None).unwrap();
        assert_eq!(p.pivots.0, vec![Pivot::Weight(0.0)]);
        assert!(matches!(
            warmstart_predictor(&prev, 3, None),
            Err(PredictError::AdIdMismatch {
                previous: 2,
                current: 3
            })
        ));
        let p = warmstart_predictor(&prev, 2, Some(&[1, 0])).unwrap();
        assert_eq!(p.pivots.0, vec![Pivot::Weight(3.0), Pivot::Weight(2.0)]);
        assert!(matches!(
            warmstart_predictor(&prev, 1, Some(&[5])),
            Err(PredictError::IdMapOutOfRange { .. })
        ));
    }

    #[test]
    fn quantile_examples() {
        let g = fig1_instance();
        let p = quantile_predictor(&g);
        // a: 8,6,4,2 with b(a)=2 -> third best is 4
        assert_eq!(p.pivots.0[0], Pivot::Weight(4.0));
        // b: 9,7,3,1 -> 3
        assert_eq!(p.pivots.0[1], Pivot::Weight(3.0));

        let edges = [RawEdge::new(0, 0, 1.0), RawEdge::new(0, 1, 2.0)];
        let g =
            BipartiteInstance::build(1, 2, &edges, CapacityRule::Uniform { ad: 2, consumer: 1 })
                .unwrap();
        assert_eq!(quantile_predictor(&g).pivots.0, vec![Pivot::Weight(0.0)]);
    }

    #[test]
    fn quantile_with_ties_pours_nothing_then_recovers() {
        let edges = [
            RawEdge::new(0, 0, 5.0),
            RawEdge::new(0, 1, 5.0),
            RawEdge::new(0, 2, 5.0),
        ];
        let g =
            BipartiteInstance::build(1, 3, &edges, CapacityRule::Uniform { ad: 1, consumer: 1 })
                .unwrap();
        let p = quantile_predictor(&g);
        assert_eq!(p.pivots.0, vec![Pivot::Weight(5.0)]);
        let out = solve_pivot(&g, &QuantilePredictor, 1).unwrap();
        assert_eq!(out.matching.pairs(), &[(0, 0)]);
        assert_eq!(out.matching, solve_serial_greedy(&g).0);
        assert_eq!(out.correction_iterations, 1);
    }

    #[test]
    fn file_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let g = fig1_instance();
        let path = dir.path().join("p.piv");
        std::fs::write(&path, "0 2.0\n1 3.0\n").unwrap();
        let p = file_predictor(&path, &g).unwrap();
        assert_eq!(p.pivots.0, vec![Pivot::Weight(2.0), Pivot::Weight(3.0)]);

        std::fs::write(&path, "").unwrap();
        let p = file_predictor(&path, &g).unwrap();
        assert_eq!(p.pivots.0, vec![Pivot::Weight(0.0), Pivot::Weight(0.0)]);

        std::fs::write(&path, "# comment\n7 1.0\n1 nan\n0 -3\n").unwrap();
        let p = file_predictor(&path, &g).unwrap();
        assert_eq!(p.pivots.0, vec![Pivot::Weight(0.0), Pivot::Weight(0.0)]);

        std::fs::write(&path, "0 2.0 extra\n").unwrap();
        assert!(matches!(
            file_predictor(&path, &g),
            Err(PredictError::Format { .. })
        ));
        assert!(matches!(
            file_predictor(&dir.path().join("missing.piv"), &g),
            Err(PredictError::Read { .. })
        ));
    }

    #[test]
    fn fixed_predictor_reports_missing_ads() {
        let g = fig1_instance();
        let err = solve_pivot(
            &g,
            &FixedPredictor(PivotVector(vec![Pivot::Weight(1.0)])),
            1,
        )
        .unwrap_err();
        match err {
            crate::pivot::PivotError::PredictorFailure { source, .. } => {
                assert!(matches!(source, PredictError::MissingAds { ads } if ads == vec![1]));
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
