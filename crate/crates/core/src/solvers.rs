//! Baseline solvers: serial greedy and iteration-synchronous b-suitor.
//!
//! Both return the greedy matching under the canonical edge order and the
//! per-ad thresholds, so either can generate pivot labels.

use crate::exec::{with_workers, Exec};
use crate::graph::{BipartiteInstance, EdgeKey, Matching};
use crate::state::{
    thresholds_from_accepted, AdState, Mode, Remaining, SolverState, ThresholdVector,
};

/// Sorts all edges globally and takes each one whose endpoints still have
/// spare capacity.
pub fn solve_serial_greedy(instance: &BipartiteInstance) -> (Matching, ThresholdVector) {
    let mut keys: Vec<EdgeKey> = (0..instance.num_ads())
        .flat_map(|a| instance.ad_keys(a))
        .collect();
    keys.sort_unstable();

    let mut ad_left: Vec<usize> = instance.ad_capacities().to_vec();
    let mut con_left: Vec<usize> = instance.consumer_capacities().to_vec();
    let mut lowest: Vec<Option<EdgeKey>> = vec![None; instance.num_ads()];
    let mut taken = Vec::new();
    for k in keys {
        if ad_left[k.ad] > 0 && con_left[k.consumer] > 0 {
            ad_left[k.ad] -= 1;
            con_left[k.consumer] -= 1;
            // keys arrive best-first, so the last one taken is the weakest
            lowest[k.ad] = Some(k);
            taken.push(k);
        }
    }
    let counts: Vec<usize> = (0..instance.num_ads())
        .map(|a| instance.ad_capacity(a) - ad_left[a])
        .collect();
    let thresholds = thresholds_from_accepted(instance, &lowest, &counts);
    (Matching::from_keys(taken), thresholds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuitorOutcome {
    pub matching: Matching,
    pub thresholds: ThresholdVector,
    /// Pour rounds until every ad is full or exhausted.
    pub iterations: usize,
}

pub fn solve_bsuitor(instance: &BipartiteInstance, worker_count: usize) -> SuitorOutcome {
    with_workers(worker_count.max(1), |exec| bsuitor_with(instance, &exec))
}

pub(crate) fn suitor_state<'g>(instance: &'g BipartiteInstance, exec: &Exec) -> SolverState<'g> {
    let ads: Vec<usize> = (0..instance.num_ads()).collect();
    let states = exec.map(&ads, |_, &a| {
        let mut keys: Vec<EdgeKey> = instance.ad_keys(a).collect();
        keys.sort_unstable();
        AdState::new(instance.ad_capacity(a), Remaining::Sorted { keys, next: 0 })
    });
    SolverState::new(instance, Mode::Suitor, states)
}

pub(crate) fn bsuitor_with(instance: &BipartiteInstance, exec: &Exec) -> SuitorOutcome {
    let mut state = suitor_state(instance, exec);
    state.run_to_completion(exec);
    SuitorOutcome {
        matching: state.matching(),
        thresholds: state
            .extract_thresholds()
            .expect("run_to_completion leaves every ad settled"),
        iterations: state.rounds(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{fig1_instance, CapacityRule, RawEdge};
    use crate::state::{SolveError, Threshold};

    #[test]
    fn greedy_fig1() {
        let g = fig1_instance();
        let (m, thr) = solve_serial_greedy(&g);
        assert_eq!(m.pairs(), &[(0, 0), (0, 2), (1, 1), (1, 3)]);
        assert_eq!(m.total_weight(), 28.0);
        assert_eq!(
            thr.0,
            vec![
                Threshold::Key(EdgeKey::new(2.0, 0, 3)),
                Threshold::Key(EdgeKey::new(3.0, 1, 0))
            ]
        );
    }

    #[test]
    fn bsuitor_fig1() {
        let g = fig1_instance();
        let out = solve_bsuitor(&g, 1);
        assert_eq!(out.matching.pairs(), &[(0, 0), (0, 2), (1, 1), (1, 3)]);
        assert_eq!(out.iterations, 2);
        assert_eq!(out.thresholds.0[0], Threshold::Key(EdgeKey::new(2.0, 0, 3)));
        assert_eq!(out.thresholds.0[1], Threshold::Key(EdgeKey::new(3.0, 1, 0)));
    }

    #[test]
    fn single_edge() {
        let g = BipartiteInstance::build(
            1,
            1,
            &[RawEdge::new(0, 0, 2.5)],
            CapacityRule::Uniform { ad: 1, consumer: 1 },
        )
        .unwrap();
        let (m, _) = solve_serial_greedy(&g);
        assert_eq!(m.pairs(), &[(0, 0)]);
        assert_eq!(m.total_weight(), 2.5);
        assert_eq!(solve_bsuitor(&g, 1).matching, m);
    }

    #[test]
    fn star_keeps_two_heaviest() {
        // brute force over the 8 subsets of three edges with b(a)=2: {5,4} = 9 is best
        let edges = [
            RawEdge::new(0, 0, 5.0),
            RawEdge::new(0, 1, 4.0),
            RawEdge::new(0, 2, 3.0),
        ];
        let g = BipartiteInstance::build(
            1,
            3,
            &edges,
            CapacityRule::Explicit {
                ads: vec![2],
                consumers: vec![1, 1, 1],
            },
        )
        .unwrap();
        let (m, thr) = solve_serial_greedy(&g);
        assert_eq!(m.pairs(), &[(0, 0), (0, 1)]);
        assert_eq!(m.total_weight(), 9.0);
        assert_eq!(thr.0, vec![Threshold::Key(EdgeKey::new(3.0, 0, 2))]);
    }

    #[test]
    fn uncontested_ads_finish_in_one_round() {
        let edges = [
            RawEdge::new(0, 0, 1.0),
            RawEdge::new(0, 1, 2.0),
            RawEdge::new(1, 2, 3.0),
        ];
        let g =
            BipartiteInstance::build(2, 3, &edges, CapacityRule::Uniform { ad: 3, consumer: 1 })
                .unwrap();
        let out = solve_bsuitor(&g, 1);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.matching.len(), 3);
        assert!(out.thresholds.iter().all(|t| *t == Threshold::BelowAll));
    }

    #[test]
    fn full_degree_ad_without_evictions_is_below_all() {
        let edges = [RawEdge::new(0, 0, 1.0), RawEdge::new(0, 1, 2.0)];
        let g =
            BipartiteInstance::build(1, 2, &edges, CapacityRule::Uniform { ad: 2, consumer: 1 })
                .unwrap();
        assert_eq!(solve_bsuitor(&g, 1).thresholds.0, vec![Threshold::BelowAll]);
        assert_eq!(solve_serial_greedy(&g).1 .0, vec![Threshold::BelowAll]);
    }

    #[test]
    fn degenerate_ads() {
        let g = BipartiteInstance::build(3, 0, &[], CapacityRule::HalfDegree).unwrap();
        let out = solve_bsuitor(&g, 2);
        assert_eq!(out.iterations, 0);
        assert!(out.matching.is_empty());
        assert!(out.thresholds.iter().all(|t| *t == Threshold::BelowAll));
    }

    #[test]
    fn thresholds_need_termination() {
        let g = fig1_instance();
        let exec = Exec::sequential();
        let mut state = suitor_state(&g, &exec);
        assert!(matches!(
            state.extract_thresholds(),
            Err(SolveError::SolverNotTerminated { unsettled: 2 })
        ));
        assert!(state.round(&exec));
        assert!(state.extract_thresholds().is_err());
        state.run_to_completion(&exec);
        assert!(state.extract_thresholds().is_ok());
    }
}
