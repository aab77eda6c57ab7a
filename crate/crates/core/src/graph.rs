//! Bipartite instance, canonical edge order and matchings.
//!
//! Ads are stored in compressed adjacency form: the incident edges of ad `a`
//! live in `offsets[a]..offsets[a + 1]`, sorted by consumer id. The instance is
//! immutable once built, so it can be shared by reference across workers.

use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate edge ({ad}, {consumer})")]
    DuplicateEdge { ad: usize, consumer: usize },
    #[error("edge ({ad}, {consumer}) has non-positive weight {weight}")]
    NonPositiveWeight {
        ad: usize,
        consumer: usize,
        weight: f64,
    },
    #[error("edge ({ad}, {consumer}) has non-finite weight")]
    NonFiniteWeight { ad: usize, consumer: usize },
    #[error(
        "edge ({ad}, {consumer}) is out of range for {num_ads} ads x {num_consumers} consumers"
    )]
    IdOutOfRange {
        ad: usize,
        consumer: usize,
        num_ads: usize,
        num_consumers: usize,
    },
    #[error("capacity vector for {side} has length {got}, expected {expected}")]
    CapacityLength {
        side: Side,
        got: usize,
        expected: usize,
    },
    #[error("{side} {id} has zero capacity")]
    ZeroCapacity { side: Side, id: usize },
    #[error("matched pair ({ad}, {consumer}) is not an edge of the instance")]
    UnknownEdge { ad: usize, consumer: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Ad,
    Consumer,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Ad => f.write_str("ad"),
            Side::Consumer => f.write_str("consumer"),
        }
    }
}

/// An edge identified by its weight and endpoints.
///
/// `Ord` is the canonical order used by every solver: heavier edges come
/// first, ties go to the smaller ad id and then to the smaller consumer id.
/// "Less" therefore means "is preferred".
#[derive(Debug, Clone, Copy)]
pub struct EdgeKey {
    pub weight: f64,
    pub ad: usize,
    pub consumer: usize,
}

impl EdgeKey {
    pub fn new(weight: f64, ad: usize, consumer: usize) -> Self {
        EdgeKey {
            weight,
            ad,
            consumer,
        }
    }

    /// True when `self` strictly precedes `other` in canonical order.
    #[inline]
    pub fn precedes(&self, other: &EdgeKey) -> bool {
        self.cmp(other) == Ordering::Less
    }
}

impl Ord for EdgeKey {
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight
            .total_cmp(&self.weight)
            .then(self.ad.cmp(&other.ad))
            .then(self.consumer.cmp(&other.consumer))
    }
}

impl PartialOrd for EdgeKey {
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for EdgeKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for EdgeKey {}

pub fn canonical_edge_compare(e1: &EdgeKey, e2: &EdgeKey) -> Ordering {
    e1.cmp(e2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEdge {
    pub ad: usize,
    pub consumer: usize,
    pub weight: f64,
}

impl RawEdge {
    pub fn new(ad: usize, consumer: usize, weight: f64) -> Self {
        RawEdge {
            ad,
            consumer,
            weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub consumer: usize,
    pub weight: f64,
}

/// How vertex capacities are assigned when an instance is built.
#[derive(Debug, Clone, PartialEq)]
pub enum CapacityRule {
    /// `b(a) = ceil(deg(a) / 2)` for ads and `b(c) = min(b, deg(c))` for
    /// consumers, where `b` is the mean consumer degree rounded up. Every
    /// capacity is clamped to at least 1.
    HalfDegree,
    Uniform {
        ad: usize,
        consumer: usize,
    },
    Explicit {
        ads: Vec<usize>,
        consumers: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteInstance {
    num_ads: usize,
    num_consumers: usize,
    offsets: Vec<usize>,
    neighbors: Vec<Neighbor>,
    consumer_degree: Vec<usize>,
    ad_capacity: Vec<usize>,
    consumer_capacity: Vec<usize>,
}

impl BipartiteInstance {
    /// Builds an instance from an edge list.
    pub fn build(
        num_ads: usize,
        num_consumers: usize,
        raw_edges: &[RawEdge],
        capacities: CapacityRule,
    ) -> Result<Self, GraphError> {
        let mut counts = vec![0usize; num_ads + 1];
        for e in raw_edges {
            if e.ad >= num_ads || e.consumer >= num_consumers {
                return Err(GraphError::IdOutOfRange {
                    ad: e.ad,
                    consumer: e.consumer,
                    num_ads,
                    num_consumers,
                });
            }
            if e.weight.is_nan() || e.weight <= 0.0 {
                return Err(GraphError::NonPositiveWeight {
                    ad: e.ad,
                    consumer: e.consumer,
                    weight: e.weight,
                });
            }
            if !e.weight.is_finite() {
                return Err(GraphError::NonFiniteWeight {
                    ad: e.ad,
                    consumer: e.consumer,
                });
            }
            counts[e.ad + 1] += 1;
        }
        for a in 0..num_ads {
            counts[a + 1] += counts[a];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut neighbors = vec![
            Neighbor {
                consumer: 0,
                weight: 0.0
            };
            raw_edges.len()
        ];
        for e in raw_edges {
            neighbors[cursor[e.ad]] = Neighbor {
                consumer: e.consumer,
                weight: e.weight,
            };
            cursor[e.ad] += 1;
        }
        let mut consumer_degree = vec![0usize; num_consumers];
        for a in 0..num_ads {
            let slice = &mut neighbors[offsets[a]..offsets[a + 1]];
            slice.sort_by_key(|n| n.consumer);
            for w in slice.windows(2) {
                if w[0].consumer == w[1].consumer {
                    return Err(GraphError::DuplicateEdge {
                        ad: a,
                        consumer: w[0].consumer,
                    });
                }
            }
            for n in slice.iter() {
                consumer_degree[n.consumer] += 1;
            }
        }

        let mut instance = BipartiteInstance {
            num_ads,
            num_consumers,
            offsets,
            neighbors,
            consumer_degree,
            ad_capacity: Vec::new(),
            consumer_capacity: Vec::new(),
        };
        let (ads, consumers) = match capacities {
            CapacityRule::HalfDegree => instance.half_degree_capacities(),
            CapacityRule::Uniform { ad, consumer } => {
                (vec![ad; num_ads], vec![consumer; num_consumers])
            }
            CapacityRule::Explicit { ads, consumers } => (ads, consumers),
        };
        instance.set_capacities(ads, consumers)?;
        Ok(instance)
    }

    /// Replaces both capacity vectors, validating lengths and positivity.
    pub fn with_capacities(
        mut self,
        ads: Vec<usize>,
        consumers: Vec<usize>,
    ) -> Result<Self, GraphError> {
        self.set_capacities(ads, consumers)?;
        Ok(self)
    }

    fn set_capacities(&mut self, ads: Vec<usize>, consumers: Vec<usize>) -> Result<(), GraphError> {
        if ads.len() != self.num_ads {
            return Err(GraphError::CapacityLength {
                side: Side::Ad,
                got: ads.len(),
                expected: self.num_ads,
            });
        }
        if consumers.len() != self.num_consumers {
            return Err(GraphError::CapacityLength {
                side: Side::Consumer,
                got: consumers.len(),
                expected: self.num_consumers,
            });
        }
        if let Some(id) = ads.iter().position(|&b| b == 0) {
            return Err(GraphError::ZeroCapacity { side: Side::Ad, id });
        }
        if let Some(id) = consumers.iter().position(|&b| b == 0) {
            return Err(GraphError::ZeroCapacity {
                side: Side::Consumer,
                id,
            });
        }
        self.ad_capacity = ads;
        self.consumer_capacity = consumers;
        Ok(())
    }

    pub fn half_degree_capacities(&self) -> (Vec<usize>, Vec<usize>) {
        let ads = (0..self.num_ads)
            .map(|a| self.ad_degree(a).div_ceil(2).max(1))
            .collect();
        let mean = if self.num_consumers == 0 {
            1
        } else {
            self.num_edges().div_ceil(self.num_consumers)
        };
        let consumers = self
            .consumer_degree
            .iter()
            .map(|&d| mean.min(d).max(1))
            .collect();
        (ads, consumers)
    }

    pub fn num_ads(&self) -> usize {
        self.num_ads
    }

    pub fn num_consumers(&self) -> usize {
        self.num_consumers
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len()
    }

    pub fn ad_degree(&self, ad: usize) -> usize {
        self.offsets[ad + 1] - self.offsets[ad]
    }

    pub fn consumer_degree(&self, consumer: usize) -> usize {
        self.consumer_degree[consumer]
    }

    pub fn max_ad_degree(&self) -> usize {
        (0..self.num_ads)
            .map(|a| self.ad_degree(a))
            .max()
            .unwrap_or(0)
    }

    pub fn ad_capacity(&self, ad: usize) -> usize {
        self.ad_capacity[ad]
    }

    pub fn consumer_capacity(&self, consumer: usize) -> usize {
        self.consumer_capacity[consumer]
    }

    pub fn ad_capacities(&self) -> &[usize] {
        &self.ad_capacity
    }

    pub fn consumer_capacities(&self) -> &[usize] {
        &self.consumer_capacity
    }

    /// Incident edges of `ad`, sorted by consumer id.
    pub fn neighbors(&self, ad: usize) -> &[Neighbor] {
        &self.neighbors[self.offsets[ad]..self.offsets[ad + 1]]
    }

    pub fn ad_keys(&self, ad: usize) -> impl Iterator<Item = EdgeKey> + '_ {
        self.neighbors(ad)
            .iter()
            .map(move |n| EdgeKey::new(n.weight, ad, n.consumer))
    }

    /// All edges in adjacency order (ad ascending, then consumer ascending).
    pub fn edges(&self) -> impl Iterator<Item = RawEdge> + '_ {
        (0..self.num_ads).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .map(move |n| RawEdge::new(a, n.consumer, n.weight))
        })
    }

    pub fn weight(&self, ad: usize, consumer: usize) -> Option<f64> {
        if ad >= self.num_ads {
            return None;
        }
        let slice = self.neighbors(ad);
        slice
            .binary_search_by_key(&consumer, |n| n.consumer)
            .ok()
            .map(|i| slice[i].weight)
    }

    /// Same topology and capacities, new weights given in [`edges`](Self::edges) order.
    pub(crate) fn with_weights(&self, weights: impl IntoIterator<Item = f64>) -> Self {
        let mut out = self.clone();
        for (n, w) in out.neighbors.iter_mut().zip(weights) {
            n.weight = w;
        }
        out
    }
}

/// A set of selected edges together with its total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
    total_weight: f64,
}

impl Matching {
    pub fn empty() -> Self {
        Matching {
            pairs: Vec::new(),
            total_weight: 0.0,
        }
    }

    /// Builds a matching from `(ad, consumer)` pairs, looking weights up in
    /// `instance`. Repeated pairs are collapsed.
    pub fn from_pairs(
        instance: &BipartiteInstance,
        mut pairs: Vec<(usize, usize)>,
    ) -> Result<Self, GraphError> {
        pairs.sort_unstable();
        pairs.dedup();
        let mut total_weight = 0.0;
        for &(ad, consumer) in &pairs {
            total_weight += instance
                .weight(ad, consumer)
                .ok_or(GraphError::UnknownEdge { ad, consumer })?;
        }
        Ok(Matching {
            pairs,
            total_weight,
        })
    }

    /// Builds a matching from edge keys known to belong to the instance.
    pub(crate) fn from_keys(mut keys: Vec<EdgeKey>) -> Self {
        keys.sort_unstable_by_key(|k| (k.ad, k.consumer));
        keys.dedup_by_key(|k| (k.ad, k.consumer));
        let total_weight = keys.iter().fold(0.0, |acc, k| acc + k.weight);
        Matching {
            pairs: keys.iter().map(|k| (k.ad, k.consumer)).collect(),
            total_weight,
        }
    }

    /// `(ad, consumer)` pairs sorted ascending.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn contains(&self, ad: usize, consumer: usize) -> bool {
        self.pairs.binary_search(&(ad, consumer)).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub side: Side,
    pub id: usize,
    pub degree: usize,
    pub capacity: usize,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} matched {} times, capacity {}",
            self.side, self.id, self.degree, self.capacity
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks both capacity families for `matching` against `instance`.
pub fn verify_feasible(
    instance: &BipartiteInstance,
    matching: &Matching,
) -> Result<FeasibilityReport, GraphError> {
    let mut ad_deg = vec![0usize; instance.num_ads()];
    let mut con_deg = vec![0usize; instance.num_consumers()];
    for &(ad, consumer) in matching.pairs() {
        if instance.weight(ad, consumer).is_none() {
            return Err(GraphError::UnknownEdge { ad, consumer });
        }
        ad_deg[ad] += 1;
        con_deg[consumer] += 1;
    }
    let mut violations = Vec::new();
    for (a, &d) in ad_deg.iter().enumerate() {
        if d > instance.ad_capacity(a) {
            violations.push(Violation {
                side: Side::Ad,
                id: a,
                degree: d,
                capacity: instance.ad_capacity(a),
            });
        }
    }
    for (c, &d) in con_deg.iter().enumerate() {
        if d > instance.consumer_capacity(c) {
            violations.push(Violation {
                side: Side::Consumer,
                id: c,
                degree: d,
                capacity: instance.consumer_capacity(c),
            });
        }
    }
    Ok(FeasibilityReport { violations })
}

/// The two-ad, four-consumer instance used throughout the tests: ads `a=0`
/// and `b=1` with capacity 2, consumers `1..=4` mapped to ids `0..=3` with
/// capacity 1.
pub fn fig1_instance() -> BipartiteInstance {
    let a = [8.0, 6.0, 4.0, 2.0];
    let b = [3.0, 7.0, 1.0, 9.0];
    let mut edges = Vec::with_capacity(8);
    for (c, &w) in a.iter().enumerate() {
        edges.push(RawEdge::new(0, c, w));
    }
    for (c, &w) in b.iter().enumerate() {
        edges.push(RawEdge::new(1, c, w));
    }
    BipartiteInstance::build(2, 4, &edges, CapacityRule::Uniform { ad: 2, consumer: 1 })
        .expect("fixture is valid")
}
