//! Exact optimum for small instances by branch and bound.
//!
//! Edges are decided in canonical order (include first, then exclude). The
//! incumbent starts at the greedy matching. A node is pruned when the
//! current value plus an upper bound on the undecided edges cannot beat it;
//! the bound is the smaller of two relaxations, one keeping only ad
//! capacities and one keeping only consumer capacities.

use thiserror::Error;

use crate::graph::{BipartiteInstance, EdgeKey, Matching};
use crate::solvers::solve_serial_greedy;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error(
        "exact search stopped after {nodes} nodes on {edges} edges; the instance is too large"
    )]
    BudgetExceeded { edges: usize, nodes: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactLimits {
    /// Largest edge count searched without an explicit node budget.
    pub max_edges: usize,
    pub node_budget: Option<u64>,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_edges: 40,
            node_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub optimal_value: f64,
    pub optimal_matching: Matching,
    pub node_count: u64,
}

struct Search<'a> {
    keys: &'a [EdgeKey],
    ad_left: Vec<usize>,
    con_left: Vec<usize>,
    chosen: Vec<bool>,
    best_value: f64,
    best: Vec<bool>,
    nodes: u64,
    budget: Option<u64>,
    // scratch for the bound
    ad_used: Vec<usize>,
    con_used: Vec<usize>,
}

impl Search<'_> {
    fn upper_bound(&mut self, from: usize) -> f64 {
        self.ad_used.iter_mut().for_each(|x| *x = 0);
        self.con_used.iter_mut().for_each(|x| *x = 0);
        let (mut by_ad, mut by_con) = (0.0, 0.0);
        for k in &self.keys[from..] {
            if self.ad_left[k.ad] == 0 || self.con_left[k.consumer] == 0 {
                continue;
            }
            if self.ad_used[k.ad] < self.ad_left[k.ad] {
                self.ad_used[k.ad] += 1;
                by_ad += k.weight;
            }
            if self.con_used[k.consumer] < self.con_left[k.consumer] {
                self.con_used[k.consumer] += 1;
                by_con += k.weight;
            }
        }
        f64::min(by_ad, by_con)
    }

    fn dfs(&mut self, i: usize, value: f64) -> Result<(), ()> {
        self.nodes += 1;
        if self.budget.is_some_and(|b| self.nodes > b) {
            return Err(());
        }
        if value > self.best_value {
            self.best_value = value;
            self.best.clone_from(&self.chosen);
        }
        if i == self.keys.len() || value + self.upper_bound(i) <= self.best_value {
            return Ok(());
        }
        let k = self.keys[i];
        if self.ad_left[k.ad] > 0 && self.con_left[k.consumer] > 0 {
            self.ad_left[k.ad] -= 1;
            self.con_left[k.consumer] -= 1;
            self.chosen[i] = true;
            let r = self.dfs(i + 1, value + k.weight);
            self.chosen[i] = false;
            self.ad_left[k.ad] += 1;
            self.con_left[k.consumer] += 1;
            r?;
        }
        self.dfs(i + 1, value)
    }
}

pub fn solve_exact(
    instance: &BipartiteInstance,
    limits: ExactLimits,
) -> Result<ExactResult, ExactError> {
    let edges = instance.num_edges();
    if edges > limits.max_edges && limits.node_budget.is_none() {
        return Err(ExactError::BudgetExceeded { edges, nodes: 0 });
    }
    let mut keys: Vec<EdgeKey> = (0..instance.num_ads())
        .flat_map(|a| instance.ad_keys(a))
        .collect();
    keys.sort_unstable();

    let (greedy, _) = solve_serial_greedy(instance);
    let best: Vec<bool> = keys
        .iter()
        .map(|k| greedy.contains(k.ad, k.consumer))
        .collect();
    let mut search = Search {
        keys: &keys,
        ad_left: instance.ad_capacities().to_vec(),
        con_left: instance.consumer_capacities().to_vec(),
        chosen: vec![false; keys.len()],
        best_value: greedy.total_weight(),
        best,
        nodes: 0,
        budget: limits.node_budget,
        ad_used: vec![0; instance.num_ads()],
        con_used: vec![0; instance.num_consumers()],
    };
    if search.dfs(0, 0.0).is_err() {
        return Err(ExactError::BudgetExceeded {
            edges,
            nodes: search.nodes,
        });
    }
    let chosen: Vec<EdgeKey> = keys
        .iter()
        .zip(&search.best)
        .filter_map(|(k, &b)| b.then_some(*k))
        .collect();
    let optimal_matching = Matching::from_keys(chosen);
    Ok(ExactResult {
        optimal_value: optimal_matching.total_weight(),
        optimal_matching,
        node_count: search.nodes,
    })
}
