//! Iteration-synchronous pour/recall engine shared by b-suitor and the pivot
//! search.
//!
//! Each round has three steps separated by barriers:
//!
//! 1. every ad acts on its accepted count at the last barrier: an
//!    over-subscribed ad recalls its weakest reserved edges, an
//!    under-subscribed one pours more;
//! 2. actions are bucketed by consumer and each consumer applies its bucket
//!    to its live-offer set, reporting which offers entered or left its top
//!    `b(c)` view;
//! 3. those reports are folded into the ads' accepted counts.
//!
//! Nothing inside a step depends on the order in which ads or consumers are
//! processed, so results do not depend on the worker count.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::exec::Exec;
use crate::graph::{BipartiteInstance, EdgeKey, Matching};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("solver has not terminated: {unsettled} ads are still active")]
    SolverNotTerminated { unsettled: usize },
}

/// Per-ad boundary of the poured region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    /// Heaviest neighbor that was never poured.
    Key(EdgeKey),
    /// The ad poured its entire neighbor list.
    BelowAll,
}

impl Threshold {
    /// Weight of the threshold edge, or 0 for [`Threshold::BelowAll`].
    pub fn raw_weight(&self) -> f64 {
        match self {
            Threshold::Key(k) => k.weight,
            Threshold::BelowAll => 0.0,
        }
    }
}

/// One [`Threshold`] per ad.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ThresholdVector(pub Vec<Threshold>);

impl ThresholdVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, ad: usize) -> Option<&Threshold> {
        self.0.get(ad)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Threshold> {
        self.0.iter()
    }
}

/// Best neighbor of `ad` strictly after `lowest` in canonical order.
pub(crate) fn threshold_after(
    instance: &BipartiteInstance,
    ad: usize,
    lowest: &EdgeKey,
) -> Threshold {
    instance
        .ad_keys(ad)
        .filter(|k| lowest.precedes(k))
        .min()
        .map_or(Threshold::BelowAll, Threshold::Key)
}

/// Thresholds implied by a final matching: an ad that filled its capacity
/// stopped right after its weakest matched edge; any other ad poured
/// everything.
pub(crate) fn thresholds_from_accepted(
    instance: &BipartiteInstance,
    lowest_accepted: &[Option<EdgeKey>],
    accepted_count: &[usize],
) -> ThresholdVector {
    ThresholdVector(
        (0..instance.num_ads())
            .map(|a| match lowest_accepted[a] {
                Some(low) if accepted_count[a] >= instance.ad_capacity(a) => {
                    threshold_after(instance, a, &low)
                }
                _ => Threshold::BelowAll,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Change {
    Offer(EdgeKey),
    Withdraw(EdgeKey),
}

impl Change {
    fn key(&self) -> &EdgeKey {
        match self {
            Change::Offer(k) | Change::Withdraw(k) => k,
        }
    }
}

/// Offers held by one consumer. The first `capacity` entries of `live`
/// (canonical order) form the matched view.
#[derive(Debug, Clone)]
pub(crate) struct ConsumerOffers {
    capacity: usize,
    live: Vec<EdgeKey>,
}

impl ConsumerOffers {
    fn new(capacity: usize) -> Self {
        ConsumerOffers {
            capacity,
            live: Vec::new(),
        }
    }

    fn view(&self) -> &[EdgeKey] {
        &self.live[..self.capacity.min(self.live.len())]
    }

    pub(crate) fn in_view(&self, key: &EdgeKey) -> bool {
        matches!(self.live.binary_search(key), Ok(i) if i < self.capacity)
    }

    /// Applies a batch of changes and returns `(ad, +1/-1)` for every offer
    /// that entered or left the view. With `prune`, offers outside the view
    /// are dropped since nothing can reinstate them.
    fn apply<'a>(
        &mut self,
        changes: impl IntoIterator<Item = &'a Change>,
        prune: bool,
    ) -> Vec<(usize, i64)> {
        let before: Vec<EdgeKey> = self.view().to_vec();
        let mut offers = Vec::new();
        // withdrawals first, while `live` is still sorted
        for ch in changes {
            match ch {
                Change::Offer(k) => offers.push(*k),
                Change::Withdraw(k) => match self.live.binary_search(k) {
                    Ok(i) => {
                        self.live.remove(i);
                    }
                    Err(_) => debug_assert!(false, "withdrawing an offer that is not live"),
                },
            }
        }
        let grew = !offers.is_empty();
        self.live.extend(offers);
        if grew {
            self.live.sort_unstable();
        }
        if prune {
            self.live.truncate(self.capacity);
        }
        let after = self.view();

        let mut deltas = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < before.len() || j < after.len() {
            match (before.get(i), after.get(j)) {
                (Some(x), Some(y)) if x == y => {
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x < y => {
                    deltas.push((x.ad, -1));
                    i += 1;
                }
                (Some(_), Some(y)) => {
                    deltas.push((y.ad, 1));
                    j += 1;
                }
                (Some(x), None) => {
                    deltas.push((x.ad, -1));
                    i += 1;
                }
                (None, Some(y)) => {
                    deltas.push((y.ad, 1));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        deltas
    }
}

/// Unpoured neighbors that are not in the recall buffer.
#[derive(Debug, Clone)]
pub(crate) enum Remaining {
    /// Fully sorted best-first with a pour pointer (b-suitor).
    Sorted {
        keys: Vec<EdgeKey>,
        next: usize,
    },
    /// Unsorted until the first extraction, then a heap (pivot search).
    Unsorted(Vec<EdgeKey>),
    Heap(BinaryHeap<Reverse<EdgeKey>>),
}

impl Remaining {
    fn is_empty(&self) -> bool {
        match self {
            Remaining::Sorted { keys, next } => *next >= keys.len(),
            Remaining::Unsorted(v) => v.is_empty(),
            Remaining::Heap(h) => h.is_empty(),
        }
    }

    fn pop_best(&mut self) -> Option<EdgeKey> {
        match self {
            Remaining::Sorted { keys, next } => {
                let k = keys.get(*next).copied();
                if k.is_some() {
                    *next += 1;
                }
                k
            }
            Remaining::Unsorted(v) => {
                let heap: BinaryHeap<Reverse<EdgeKey>> =
                    std::mem::take(v).into_iter().map(Reverse).collect();
                *self = Remaining::Heap(heap);
                self.pop_best()
            }
            Remaining::Heap(h) => h.pop().map(|r| r.0),
        }
    }

    fn peek_sorted(&self) -> Option<EdgeKey> {
        match self {
            Remaining::Sorted { keys, next } => keys.get(*next).copied(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AdState {
    capacity: usize,
    accepted: usize,
    /// Offers currently live at consumers; always a canonical prefix of the
    /// ad's neighbor list. Not tracked in b-suitor mode.
    live: Vec<EdgeKey>,
    /// Withdrawn edges, worst first so `pop` yields the best.
    recalled: Vec<EdgeKey>,
    remaining: Remaining,
    pour_count: usize,
}

impl AdState {
    pub(crate) fn new(capacity: usize, remaining: Remaining) -> Self {
        AdState {
            capacity,
            accepted: 0,
            live: Vec::new(),
            recalled: Vec::new(),
            remaining,
            pour_count: 0,
        }
    }

    fn has_unpoured(&self) -> bool {
        !self.recalled.is_empty() || !self.remaining.is_empty()
    }

    fn next_unpoured(&mut self) -> Option<EdgeKey> {
        self.recalled.pop().or_else(|| self.remaining.pop_best())
    }

    fn settled(&self) -> bool {
        self.accepted == self.capacity || (self.accepted < self.capacity && !self.has_unpoured())
    }

    fn deficit(&self) -> i64 {
        self.accepted as i64 - self.capacity as i64
    }

    fn offer(&mut self, key: EdgeKey, track_live: bool, out: &mut Vec<Change>) {
        if track_live {
            self.live.push(key);
        }
        self.pour_count += 1;
        out.push(Change::Offer(key));
    }

    /// Pours the next `b(a) - accepted` neighbors, best first.
    fn pour(&mut self, track_live: bool) -> Vec<Change> {
        let mut out = Vec::new();
        let want = self.capacity.saturating_sub(self.accepted);
        for _ in 0..want {
            match self.next_unpoured() {
                Some(k) => self.offer(k, track_live, &mut out),
                None => break,
            }
        }
        out
    }

    /// Withdraws every live offer after the ad's `b(a)`-th best reserved
    /// edge. This removes the `accepted - b(a)` weakest reserved edges along
    /// with any unreserved offers below them, so the live set stays a
    /// prefix. Withdrawn edges go to the recall buffer.
    fn recall(&mut self, consumers: &[ConsumerOffers]) -> Vec<Change> {
        if self.accepted <= self.capacity {
            return Vec::new();
        }
        let mut reserved: Vec<EdgeKey> = self
            .live
            .iter()
            .filter(|k| consumers[k.consumer].in_view(k))
            .copied()
            .collect();
        debug_assert_eq!(reserved.len(), self.accepted);
        let (_, cut, _) = reserved.select_nth_unstable(self.capacity - 1);
        let cut = *cut;
        let mut withdrawn: Vec<EdgeKey> = Vec::new();
        self.live.retain(|k| {
            if cut.precedes(k) {
                withdrawn.push(*k);
                false
            } else {
                true
            }
        });
        withdrawn.sort_unstable_by(|x, y| y.cmp(x));
        let out = withdrawn.iter().map(|k| Change::Withdraw(*k)).collect();
        self.recalled.extend(withdrawn);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Pure pouring; rejected offers are discarded.
    Suitor,
    /// Pouring and recalling over live-offer sets.
    Pivot,
}

/// Mutable search state over an immutable instance.
#[derive(Debug, Clone)]
pub struct SolverState<'g> {
    instance: &'g BipartiteInstance,
    mode: Mode,
    ads: Vec<AdState>,
    consumers: Vec<ConsumerOffers>,
    rounds: usize,
}

impl<'g> SolverState<'g> {
    pub(crate) fn new(instance: &'g BipartiteInstance, mode: Mode, ads: Vec<AdState>) -> Self {
        let consumers = (0..instance.num_consumers())
            .map(|c| ConsumerOffers::new(instance.consumer_capacity(c)))
            .collect();
        SolverState {
            instance,
            mode,
            ads,
            consumers,
            rounds: 0,
        }
    }

    pub fn instance(&self) -> &'g BipartiteInstance {
        self.instance
    }

    /// Barrier rounds executed so far, excluding any initial bulk offer.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Signed `reserved - b(a)` per ad at the last barrier.
    pub fn deficits(&self) -> Vec<i64> {
        self.ads.iter().map(AdState::deficit).collect()
    }

    pub fn accepted_counts(&self) -> Vec<usize> {
        self.ads.iter().map(|a| a.accepted).collect()
    }

    /// Total number of offers made, counting re-offers of recalled edges.
    pub fn pour_count(&self) -> usize {
        self.ads.iter().map(|a| a.pour_count).sum()
    }

    pub fn is_terminated(&self) -> bool {
        self.ads.iter().all(AdState::settled)
    }

    /// Offers a pre-computed batch per ad in one round without counting it.
    pub(crate) fn offer_initial(&mut self, exec: &Exec, batches: Vec<Vec<EdgeKey>>) {
        let track = self.mode == Mode::Pivot;
        let changes = exec.map_mut(&mut self.ads, |a, ad| {
            let mut out = Vec::with_capacity(batches[a].len());
            for &k in &batches[a] {
                ad.offer(k, track, &mut out);
            }
            out
        });
        self.settle(exec, changes);
    }

    /// Runs one round; returns false, without counting it, when no ad had
    /// anything to do.
    pub(crate) fn round(&mut self, exec: &Exec) -> bool {
        let track = self.mode == Mode::Pivot;
        let consumers = &self.consumers;
        let changes = exec.map_mut(&mut self.ads, |_, ad| {
            if ad.accepted > ad.capacity {
                ad.recall(consumers)
            } else {
                ad.pour(track)
            }
        });
        if changes.iter().all(Vec::is_empty) {
            return false;
        }
        self.settle(exec, changes);
        self.rounds += 1;
        true
    }

    /// Rounds until no ad acts. This always terminates: take the best edge
    /// whose liveness changes infinitely often; once every better edge is
    /// fixed, its ad can pour it at most once and withdraw it at most once.
    pub(crate) fn run_to_completion(&mut self, exec: &Exec) {
        while self.round(exec) {}
    }

    fn settle(&mut self, exec: &Exec, per_ad: Vec<Vec<Change>>) {
        let n = self.consumers.len();
        let mut starts = vec![0usize; n + 1];
        for ch in per_ad.iter().flatten() {
            starts[ch.key().consumer + 1] += 1;
        }
        for c in 0..n {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut bucketed: Vec<Option<Change>> = vec![None; starts[n]];
        for ch in per_ad.into_iter().flatten() {
            let c = ch.key().consumer;
            bucketed[fill[c]] = Some(ch);
            fill[c] += 1;
        }
        let prune = self.mode == Mode::Suitor;
        let deltas = exec.map_mut(&mut self.consumers, |c, offers| {
            let bucket = &bucketed[starts[c]..starts[c + 1]];
            if bucket.is_empty() {
                Vec::new()
            } else {
                offers.apply(bucket.iter().flatten(), prune)
            }
        });
        for (ad, d) in deltas.into_iter().flatten() {
            let slot = &mut self.ads[ad].accepted;
            *slot = (*slot as i64 + d) as usize;
        }
    }

    /// The matched views of all consumers.
    pub fn matching(&self) -> Matching {
        let keys = self
            .consumers
            .iter()
            .flat_map(|c| c.view().iter().copied())
            .collect();
        Matching::from_keys(keys)
    }

    /// Per-ad thresholds at termination.
    pub fn extract_thresholds(&self) -> Result<ThresholdVector, SolveError> {
        let unsettled = self.ads.iter().filter(|a| !a.settled()).count();
        if unsettled > 0 {
            return Err(SolveError::SolverNotTerminated { unsettled });
        }
        Ok(match self.mode {
            Mode::Suitor => ThresholdVector(
                self.ads
                    .iter()
                    .map(|a| {
                        a.remaining
                            .peek_sorted()
                            .map_or(Threshold::BelowAll, Threshold::Key)
                    })
                    .collect(),
            ),
            Mode::Pivot => {
                let mut lowest: Vec<Option<EdgeKey>> = vec![None; self.ads.len()];
                for key in self.consumers.iter().flat_map(|c| c.view()) {
                    let slot = &mut lowest[key.ad];
                    if slot.is_none_or(|l| l.precedes(key)) {
                        *slot = Some(*key);
                    }
                }
                thresholds_from_accepted(self.instance, &lowest, &self.accepted_counts())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(w: f64, a: usize, c: usize) -> EdgeKey {
        EdgeKey::new(w, a, c)
    }

    #[test]
    fn consumer_view_reports_evictions_and_reinstatement() {
        let mut c = ConsumerOffers::new(1);
        let d = c.apply([Change::Offer(k(6.0, 0, 1))].iter(), false);
        assert_eq!(d, vec![(0, 1)]);
        let d = c.apply([Change::Offer(k(7.0, 1, 1))].iter(), false);
        assert_eq!(d, vec![(1, 1), (0, -1)]);
        assert!(!c.in_view(&k(6.0, 0, 1)));
        // withdrawing the winner reinstates the next best live offer
        let d = c.apply([Change::Withdraw(k(7.0, 1, 1))].iter(), false);
        assert_eq!(d, vec![(1, -1), (0, 1)]);
        assert!(c.in_view(&k(6.0, 0, 1)));
    }

    #[test]
    fn pruned_consumer_forgets_rejected_offers() {
        let mut c = ConsumerOffers::new(1);
        c.apply(
            [Change::Offer(k(6.0, 0, 1)), Change::Offer(k(7.0, 1, 1))].iter(),
            true,
        );
        assert_eq!(c.live.len(), 1);
        assert!(c.in_view(&k(7.0, 1, 1)));
    }

    #[test]
    fn simultaneous_offer_rejected_in_same_batch_reports_nothing() {
        let mut c = ConsumerOffers::new(1);
        let d = c.apply(
            [Change::Offer(k(6.0, 0, 1)), Change::Offer(k(7.0, 1, 1))].iter(),
            false,
        );
        assert_eq!(d, vec![(1, 1)]);
    }

    #[test]
    fn offers_and_withdrawals_in_one_batch() {
        let mut c = ConsumerOffers::new(1);
        c.apply(
            [Change::Offer(k(5.0, 0, 1)), Change::Offer(k(4.0, 2, 1))].iter(),
            false,
        );
        let d = c.apply(
            [Change::Offer(k(9.0, 1, 1)), Change::Withdraw(k(5.0, 0, 1))].iter(),
            false,
        );
        assert_eq!(d, vec![(1, 1), (0, -1)]);
        assert_eq!(c.live, vec![k(9.0, 1, 1), k(4.0, 2, 1)]);
    }

    #[test]
    fn lazy_remaining_yields_best_first() {
        let mut r = Remaining::Unsorted(vec![k(2.0, 0, 3), k(4.0, 0, 2), k(4.0, 0, 1)]);
        assert_eq!(r.pop_best(), Some(k(4.0, 0, 1)));
        assert_eq!(r.pop_best(), Some(k(4.0, 0, 2)));
        assert_eq!(r.pop_best(), Some(k(2.0, 0, 3)));
        assert_eq!(r.pop_best(), None);
        assert!(r.is_empty());
    }
}
