//! Ball expansion. A ball grows around every landmark, all balls in lockstep
//! ordered by distance. Balls that have collected at least `s_min` points
//! become active; active balls sharing a point merge into one component.
//! The sweep stops at the first radius where exactly `k` components exist
//! and they cover at least `n_prime` points.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::model::Clustering;
use crate::oracle::DistanceRow;

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error("no landmark rows given")]
    NoLandmarks,
    #[error("landmark row {slot} has {got} entries, expected {expected}")]
    RowLength {
        slot: usize,
        expected: usize,
        got: usize,
    },
    #[error("minimum ball size {s_min} can never be reached with {n} points")]
    ImpossibleActivation { s_min: usize, n: usize },
    #[error("minimum ball size must be at least 1")]
    ZeroMinBallSize,
    #[error("coverage target {n_prime} exceeds the point count {n}")]
    BadCoverageTarget { n_prime: usize, n: usize },
    #[error("cluster count must be at least 1")]
    ZeroClusters,
}

/// Union-find over landmark slots with union by rank and path compression.
/// Slots only take part once activated via [`DisjointSet::make_set`].
pub struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
    active: Vec<bool>,
    sets: usize,
}

impl DisjointSet {
    pub fn new(capacity: usize) -> Self {
        DisjointSet {
            parent: (0..capacity as u32).collect(),
            rank: vec![0; capacity],
            active: vec![false; capacity],
            sets: 0,
        }
    }

    pub fn make_set(&mut self, x: usize) {
        assert!(!self.active[x], "slot {x} activated twice");
        self.active[x] = true;
        self.sets += 1;
    }

    pub fn is_active(&self, x: usize) -> bool {
        self.active[x]
    }

    pub fn find(&mut self, x: usize) -> usize {
        debug_assert!(self.active[x], "find on inactive slot {x}");
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = x;
        while self.parent[cur] as usize != cur {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    /// Merges the sets holding `a` and `b`. Returns false if they were
    /// already one set.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[lo] = hi as u32;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        self.sets -= 1;
        true
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

/// A landmark-point pair, ordered by distance with ties broken by landmark
/// slot, then point index, so the sweep order is completely determined.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PairEntry {
    dist: f64,
    slot: u32,
    point: u32,
}

impl Eq for PairEntry {}

impl Ord for PairEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.slot.cmp(&other.slot))
            .then_with(|| self.point.cmp(&other.point))
    }
}

impl PartialOrd for PairEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One processed pair, as reported by [`BallExpansion::step`].
#[derive(Debug, Clone, Copy)]
pub struct StepEvent {
    pub slot: usize,
    pub point: usize,
    pub dist: f64,
}

/// Sweep state after a pop: the current radius, how many components the
/// active balls form, and how many points they cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub radius: f64,
    pub components: usize,
    pub clustered: usize,
}

/// The sweep itself, exposed step by step so tests can compare every
/// intermediate state against an independent reconstruction.
///
/// Pairs live in one sorted queue per landmark, consumed front to back; the
/// heap holds only each landmark's next unconsumed pair, so popping it
/// yields all pairs in global ascending order while reading memory
/// sequentially instead of sifting through one giant array.
pub struct BallExpansion {
    /// Per landmark, its finite (distance, point) pairs in ascending order.
    queues: Vec<Vec<(f64, u32)>>,
    cursors: Vec<usize>,
    /// One frontier triple per landmark that still has pairs left.
    frontier: BinaryHeap<Reverse<PairEntry>>,
    items: Vec<Vec<u32>>,
    rep: Vec<Option<u32>>,
    components: DisjointSet,
    clustered: usize,
    radius: f64,
    s_min: usize,
    n: usize,
}

impl BallExpansion {
    /// Builds the sweep over all finite landmark-point pairs.
    pub fn new(rows: &[DistanceRow], n: usize, s_min: usize) -> Result<Self, ExpandError> {
        if rows.is_empty() {
            return Err(ExpandError::NoLandmarks);
        }
        if s_min == 0 {
            return Err(ExpandError::ZeroMinBallSize);
        }
        if s_min > n {
            return Err(ExpandError::ImpossibleActivation { s_min, n });
        }
        let mut queues = Vec::with_capacity(rows.len());
        for (slot, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ExpandError::RowLength {
                    slot,
                    expected: n,
                    got: row.len(),
                });
            }
            let mut queue = Vec::new();
            for (point, &dist) in row.iter().enumerate() {
                debug_assert!(!dist.is_nan(), "NaN distance in landmark row");
                if dist.is_finite() {
                    queue.push((dist, point as u32));
                }
            }
            queue.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            queues.push(queue);
        }
        let mut frontier = BinaryHeap::with_capacity(queues.len());
        for (slot, queue) in queues.iter().enumerate() {
            if let Some(&(dist, point)) = queue.first() {
                frontier.push(Reverse(PairEntry {
                    dist,
                    slot: slot as u32,
                    point,
                }));
            }
        }
        Ok(BallExpansion {
            cursors: vec![0; queues.len()],
            queues,
            frontier,
            items: vec![Vec::new(); rows.len()],
            rep: vec![None; n],
            components: DisjointSet::new(rows.len()),
            clustered: 0,
            radius: 0.0,
            s_min,
            n,
        })
    }

    /// Pops and processes the next pair. Returns `None` once every finite
    /// pair has been consumed.
    pub fn step(&mut self) -> Option<StepEvent> {
        let Reverse(entry) = self.frontier.pop()?;
        let slot = entry.slot as usize;
        self.cursors[slot] += 1;
        if let Some(&(dist, point)) = self.queues[slot].get(self.cursors[slot]) {
            self.frontier.push(Reverse(PairEntry {
                dist,
                slot: entry.slot,
                point,
            }));
        }
        self.radius = entry.dist;
        self.items[slot].push(entry.point);
        if self.items[slot].len() == self.s_min {
            self.activate(slot);
        } else if self.items[slot].len() > self.s_min {
            self.attach(slot, entry.point);
        }
        Some(StepEvent {
            slot,
            point: entry.point as usize,
            dist: entry.dist,
        })
    }

    /// The ball just reached `s_min` points: give it a component and attach
    /// everything it already holds.
    fn activate(&mut self, slot: usize) {
        self.components.make_set(slot);
        let held = std::mem::take(&mut self.items[slot]);
        for &point in &held {
            self.attach(slot, point);
        }
        self.items[slot] = held;
    }

    /// Records that an active ball holds `point`. The first active ball to
    /// claim a point becomes its representative; every later one merges its
    /// component with the representative's.
    fn attach(&mut self, slot: usize, point: u32) {
        match self.rep[point as usize] {
            None => {
                self.rep[point as usize] = Some(slot as u32);
                self.clustered += 1;
            }
            Some(rep) => {
                self.components.union(slot, rep as usize);
            }
        }
    }

    pub fn component_count(&self) -> usize {
        self.components.set_count()
    }

    /// Points covered by at least one active ball.
    pub fn clustered_count(&self) -> usize {
        self.clustered
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Distance key of the next pair the sweep would pop, if any. Lets a
    /// caller tell whether the current radius still has pending ties.
    pub fn next_dist(&self) -> Option<f64> {
        self.frontier.peek().map(|r| r.0.dist)
    }

    pub fn is_active(&self, slot: usize) -> bool {
        self.components.is_active(slot)
    }

    pub fn ball(&self, slot: usize) -> &[u32] {
        &self.items[slot]
    }

    /// Active slots grouped into components, each group ascending, groups
    /// ordered by their smallest slot. Used by tests and diagnostics.
    pub fn component_groups(&mut self) -> Vec<Vec<usize>> {
        let slots: Vec<usize> = (0..self.items.len())
            .filter(|&s| self.components.is_active(s))
            .collect();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of_root = std::collections::HashMap::new();
        for slot in slots {
            let root = self.components.find(slot);
            let idx = *group_of_root.entry(root).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[idx].push(slot);
        }
        groups
    }

    /// Turns the current components into a partial clustering: one cluster
    /// per component, each point in the cluster of its representative.
    pub fn format_clustering(&mut self) -> PartialClustering {
        let groups = self.component_groups();
        let k = groups.len();
        let mut cluster_of_root = std::collections::HashMap::new();
        for (id, group) in groups.iter().enumerate() {
            cluster_of_root.insert(self.components.find(group[0]), id);
        }
        let mut assignment = vec![None; self.n];
        for (point, rep) in self.rep.iter().enumerate() {
            if let Some(rep) = *rep {
                let root = self.components.find(rep as usize);
                assignment[point] = Some(cluster_of_root[&root]);
            }
        }
        PartialClustering {
            clustering: Clustering::new(assignment, k.max(1)),
            radius: self.radius,
            cluster_slots: groups,
        }
    }
}

/// A clustering of the covered points, plus which landmark slots ended up
/// in each cluster and the radius the sweep stopped at.
#[derive(Debug)]
pub struct PartialClustering {
    pub clustering: Clustering,
    pub radius: f64,
    /// Active landmark slots per cluster id, ascending within each cluster.
    pub cluster_slots: Vec<Vec<usize>>,
}

/// Outcome of a full sweep: either a clustering or the admission that no
/// radius produced `k` components covering enough points.
#[derive(Debug)]
pub enum ExpandOutcome {
    Clustered(PartialClustering),
    /// The sweep drained without ever hitting k components and enough
    /// coverage. Carries the final counts for diagnostics.
    NoCluster { components: usize, clustered: usize },
}

impl ExpandOutcome {
    pub fn is_no_cluster(&self) -> bool {
        matches!(self, ExpandOutcome::NoCluster { .. })
    }
}

/// Runs the sweep to the first radius with exactly `k` components covering
/// at least `n_prime` points. `NoCluster` is a legitimate outcome, not an
/// error: it means no radius worked.
pub fn expand_landmarks(
    rows: &[DistanceRow],
    n: usize,
    s_min: usize,
    n_prime: usize,
    k: usize,
) -> Result<ExpandOutcome, ExpandError> {
    expand_landmarks_traced(rows, n, s_min, n_prime, k, None)
}

/// Like [`expand_landmarks`] but optionally records a [`TraceRow`] per pop,
/// which is handy when tuning `s_min` by hand.
pub fn expand_landmarks_traced(
    rows: &[DistanceRow],
    n: usize,
    s_min: usize,
    n_prime: usize,
    k: usize,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<ExpandOutcome, ExpandError> {
    if k == 0 {
        return Err(ExpandError::ZeroClusters);
    }
    if n_prime > n {
        return Err(ExpandError::BadCoverageTarget { n_prime, n });
    }
    let mut sweep = BallExpansion::new(rows, n, s_min)?;
    while sweep.step().is_some() {
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(TraceRow {
                radius: sweep.radius(),
                components: sweep.component_count(),
                clustered: sweep.clustered_count(),
            });
        }
        if sweep.component_count() == k && sweep.clustered_count() >= n_prime {
            return Ok(ExpandOutcome::Clustered(sweep.format_clustering()));
        }
    }
    Ok(ExpandOutcome::NoCluster {
        components: sweep.component_count(),
        clustered: sweep.clustered_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coverage, QueryLedger};
    use crate::oracle::{query_one_vs_all, DistanceOracle, EuclideanOracle, MatrixOracle};

    fn rows_for(oracle: &impl DistanceOracle, landmarks: &[usize]) -> Vec<DistanceRow> {
        let ledger = QueryLedger::new();
        landmarks
            .iter()
            .map(|&l| query_one_vs_all(oracle, l, &ledger).unwrap())
            .collect()
    }

    #[test]
    fn disjoint_set_basics() {
        let mut ds = DisjointSet::new(4);
        ds.make_set(0);
        ds.make_set(2);
        ds.make_set(3);
        assert_eq!(ds.set_count(), 3);
        assert!(ds.union(0, 2));
        assert_eq!(ds.set_count(), 2);
        assert!(!ds.union(2, 0));
        assert_eq!(ds.set_count(), 2);
        assert_eq!(ds.find(0), ds.find(2));
        assert_ne!(ds.find(0), ds.find(3));
        assert!(!ds.is_active(1));
    }

    #[test]
    #[should_panic(expected = "activated twice")]
    fn double_activation_is_a_bug() {
        let mut ds = DisjointSet::new(2);
        ds.make_set(0);
        ds.make_set(0);
    }

    #[test]
    fn three_separated_pairs_terminate_at_radius_one() {
        // Points 0,1,10,11,20,21 with landmarks at 0, 10 and 20. With
        // s_min = 2 each ball activates once it reaches its partner, giving
        // three components that cover everything at radius 1.
        let oracle = EuclideanOracle::new(vec![0.0, 1.0, 10.0, 11.0, 20.0, 21.0], 6, 1);
        let rows = rows_for(&oracle, &[0, 2, 4]);
        let out = expand_landmarks(&rows, 6, 2, 6, 3).unwrap();
        let ExpandOutcome::Clustered(partial) = out else {
            panic!("expected a clustering");
        };
        assert_eq!(partial.radius, 1.0);
        assert_eq!(partial.clustering.members(), vec![
            vec![0, 1],
            vec![2, 3],
            vec![4, 5],
        ]);
        assert_eq!(partial.cluster_slots, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn oversized_min_ball_gives_no_cluster() {
        let oracle = EuclideanOracle::new(vec![0.0, 1.0, 10.0, 11.0, 20.0, 21.0], 6, 1);
        let rows = rows_for(&oracle, &[0, 2, 4]);
        assert!(expand_landmarks(&rows, 6, 4, 6, 3).unwrap().is_no_cluster());
    }

    #[test]
    fn late_point_joins_active_ball_and_merges() {
        // Landmarks at coordinates 0 and 3; the point at 2 is claimed by the
        // second ball first, so when the first ball later absorbs it, the
        // two components merge.
        let oracle = EuclideanOracle::new(vec![0.0, 1.0, 2.0, 3.0], 4, 1);
        let rows = rows_for(&oracle, &[0, 3]);
        let mut sweep = BallExpansion::new(&rows, 4, 2).unwrap();
        // Pops: (0,s0,p0) (0,s1,p3) (1,s0,p1) activate s0, (1,s1,p2)
        // activate s1, (2,s0,p2) merge, ...
        for _ in 0..4 {
            sweep.step();
        }
        assert_eq!(sweep.component_count(), 2);
        assert_eq!(sweep.clustered_count(), 4);
        sweep.step();
        assert_eq!(sweep.component_count(), 1);
        assert_eq!(sweep.clustered_count(), 4);
    }

    #[test]
    fn unreachable_pairs_never_enter_a_ball() {
        let inf = f64::INFINITY;
        let m = MatrixOracle::from_rows(vec![
            vec![0.0, 1.0, inf],
            vec![1.0, 0.0, inf],
            vec![inf, inf, 0.0],
        ])
        .unwrap();
        let rows = rows_for(&m, &[0]);
        let out = expand_landmarks(&rows, 3, 2, 2, 1).unwrap();
        let ExpandOutcome::Clustered(partial) = out else {
            panic!("expected a clustering");
        };
        assert_eq!(partial.clustering.get(2), None);
        assert_eq!(partial.clustering.unassigned_count(), 1);
        partial
            .clustering
            .validate(3, Coverage::Partial)
            .unwrap();
    }

    #[test]
    fn single_cluster_degenerate_case() {
        let oracle = EuclideanOracle::new(vec![0.0, 1.0, 2.0, 3.0], 4, 1);
        let rows = rows_for(&oracle, &[1]);
        let out = expand_landmarks(&rows, 4, 1, 4, 1).unwrap();
        let ExpandOutcome::Clustered(partial) = out else {
            panic!("expected a clustering");
        };
        assert_eq!(partial.clustering.members(), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn parameter_validation() {
        let oracle = EuclideanOracle::new(vec![0.0, 1.0], 2, 1);
        let rows = rows_for(&oracle, &[0]);
        assert!(matches!(
            expand_landmarks(&rows, 2, 3, 2, 1),
            Err(ExpandError::ImpossibleActivation { s_min: 3, n: 2 })
        ));
        assert!(matches!(
            expand_landmarks(&rows, 2, 0, 2, 1),
            Err(ExpandError::ZeroMinBallSize)
        ));
        assert!(matches!(
            expand_landmarks(&rows, 2, 1, 3, 1),
            Err(ExpandError::BadCoverageTarget { n_prime: 3, n: 2 })
        ));
        assert!(matches!(
            expand_landmarks(&rows, 2, 1, 2, 0),
            Err(ExpandError::ZeroClusters)
        ));
        assert!(matches!(
            expand_landmarks(&[], 2, 1, 2, 1),
            Err(ExpandError::NoLandmarks)
        ));
    }

    #[test]
    fn trace_records_every_pop() {
        let oracle = EuclideanOracle::new(vec![0.0, 1.0, 10.0, 11.0, 20.0, 21.0], 6, 1);
        let rows = rows_for(&oracle, &[0, 2, 4]);
        let mut trace = Vec::new();
        let out = expand_landmarks_traced(&rows, 6, 2, 6, 3, Some(&mut trace)).unwrap();
        assert!(!out.is_no_cluster());
        // Three zero-distance self pairs, then the three partners.
        assert_eq!(trace.len(), 6);
        assert_eq!(trace[2], TraceRow { radius: 0.0, components: 0, clustered: 0 });
        assert_eq!(trace[5], TraceRow { radius: 1.0, components: 3, clustered: 6 });
        // Radii never decrease and coverage never shrinks.
        for w in trace.windows(2) {
            assert!(w[0].radius <= w[1].radius);
            assert!(w[0].clustered <= w[1].clustered);
        }
    }
}
