//! Best-first search over the implicit graph of same-torso node pairs.
//!
//! Every arm keeps its own cost-to-come `g` and estimate `f = g + h`, where
//! `h` is the chain-metric distance to that arm's target node. A pair is
//! prioritized by the larger of its two estimates. From pair `(c1, c2)` the
//! successors are pairs `(n1, n2)` with `n1` in `adj(c1) + {c1}`, `n2` in
//! `adj(c2) + {c2}`, equal torso cells, and `(n1, n2) != (c1, c2)`. Holding
//! one arm still is therefore always allowed; a torso change moves both.

use std::cmp::Ordering;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::config::ChainId;
use crate::dual::{DualRoadmap, NodePair};
use crate::error::Result;
use crate::roadmap::{NodeId, Roadmap, ValidityMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// For each neighbor of one arm, only the best torso-compatible partner
    /// of the other arm is generated, in both arm orders.
    Restricted,
    /// Every torso-compatible neighbor combination is generated.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_expansions: u64,
    pub deadline: Option<Instant>,
    pub heuristic: Heuristic,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_expansions: 10_000_000,
            deadline: None,
            heuristic: Heuristic::default(),
        }
    }
}

/// Per-arm cost-to-go estimate. Both are admissible and consistent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    /// Chain metric from the node to that arm's target node.
    ChainMetric,
    /// Shortest-path cost to the target node inside that arm's masked
    /// roadmap, blocked arm edges removed. Infinite when unreachable, and
    /// such nodes are never generated.
    #[default]
    RoadmapDistance,
}

/// Total-order wrapper so distances can sit in a heap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dist(pub f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Dist {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Cost-to-go of every node of one arm's roadmap.
pub fn heuristic_table(
    kind: Heuristic,
    r: &Roadmap,
    chain: ChainId,
    mask: &ValidityMask,
    blocked: &BlockedEdges,
    target: NodeId,
) -> Vec<f64> {
    match kind {
        Heuristic::ChainMetric => (0..r.node_count() as NodeId).map(|n| r.distance(n, target)).collect(),
        Heuristic::RoadmapDistance => {
            let mut d = vec![f64::INFINITY; r.node_count()];
            if !mask.is_valid(target) {
                return d;
            }
            d[target as usize] = 0.0;
            let mut heap = BinaryHeap::from([Reverse((Dist(0.0), target))]);
            while let Some(Reverse((Dist(dn), n))) = heap.pop() {
                if dn > d[n as usize] {
                    continue;
                }
                for &m in r.neighbors(n) {
                    if !mask.is_valid(m) || blocked.arm_edge_blocked(chain, n, m) {
                        continue;
                    }
                    let dm = dn + r.distance(n, m);
                    if dm < d[m as usize] {
                        d[m as usize] = dm;
                        heap.push(Reverse((Dist(dm), m)));
                    }
                }
            }
            d
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub pairs_expanded: u64,
    pub pairs_generated: u64,
    pub queue_peak: u64,
    /// Searches that ran in exhaustive mode after a restricted attempt.
    pub fallback_used: u32,
}

impl SearchStats {
    pub fn absorb(&mut self, other: &SearchStats) {
        self.pairs_expanded += other.pairs_expanded;
        self.pairs_generated += other.pairs_generated;
        self.queue_peak = self.queue_peak.max(other.queue_peak);
        self.fallback_used += other.fallback_used;
    }
}

/// Edges excluded from the search: per-arm roadmap edges and whole pair
/// transitions. Stored undirected.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockedEdges {
    arm: [FxHashSet<(NodeId, NodeId)>; 2],
    pairs: FxHashSet<(NodePair, NodePair)>,
}

fn ordered<T: Ord>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl BlockedEdges {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the edge was newly added.
    pub fn block_arm_edge(&mut self, chain: ChainId, a: NodeId, b: NodeId) -> bool {
        a != b && self.arm[chain.index()].insert(ordered(a, b))
    }

    pub fn block_transition(&mut self, from: NodePair, to: NodePair) -> bool {
        from != to && self.pairs.insert(ordered(from, to))
    }

    pub fn arm_edge_blocked(&self, chain: ChainId, a: NodeId, b: NodeId) -> bool {
        a != b && self.arm[chain.index()].contains(&ordered(a, b))
    }

    /// Whether moving from `from` to `to` uses any blocked edge.
    pub fn transition_blocked(&self, from: NodePair, to: NodePair) -> bool {
        self.arm_edge_blocked(ChainId::Arm1, from.arm1, to.arm1)
            || self.arm_edge_blocked(ChainId::Arm2, from.arm2, to.arm2)
            || (!self.pairs.is_empty() && self.pairs.contains(&ordered(from, to)))
    }

    pub fn len(&self) -> usize {
        self.arm[0].len() + self.arm[1].len() + self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-arm cost-to-come of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairCost {
    pub g1: f64,
    pub g2: f64,
}

impl PairCost {
    pub fn max(&self) -> f64 {
        self.g1.max(self.g2)
    }

    pub fn sum(&self) -> f64 {
        self.g1 + self.g2
    }

    /// Larger arm cost first, then the sum, then arm 1.
    pub fn cmp_key(&self, other: &PairCost) -> Ordering {
        self.max()
            .total_cmp(&other.max())
            .then(self.sum().total_cmp(&other.sum()))
            .then(self.g1.total_cmp(&other.g1))
    }
}

/// Queue ordering shared with the product-graph oracle.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QueueKey {
    pub max_f: i64,
    pub sum_f: i64,
    /// Negated summed g: among equal f, deeper pairs pop first.
    pub neg_depth: i64,
    pub pair: NodePair,
}

/// Keys compare on a 1e-9 lattice so that equal-length routes summed in a
/// different order still tie exactly.
fn quantize(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

impl QueueKey {
    pub(crate) fn new(f1: f64, f2: f64, cost: PairCost, pair: NodePair) -> Self {
        Self {
            max_f: quantize(f1.max(f2)),
            sum_f: quantize(f1 + f2),
            neg_depth: -quantize(cost.g1 + cost.g2),
            pair,
        }
    }
}

impl Ord for QueueKey {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.max_f, self.sum_f, self.neg_depth, self.pair).cmp(&(o.max_f, o.sum_f, o.neg_depth, o.pair))
    }
}

impl PartialOrd for QueueKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for QueueKey {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for QueueKey {}

/// Min-heap entry: the key plus the cost it was pushed with, so stale
/// entries can be recognized on pop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QueueEntry {
    pub key: QueueKey,
    pub cost: PairCost,
}

impl Ord for QueueEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.key.cmp(&self.key)
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for QueueEntry {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}

impl Eq for QueueEntry {}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found { path: Vec<NodePair>, cost: PairCost },
    NoPath,
    LimitExceeded,
}

impl SearchOutcome {
    pub fn path(&self) -> Option<&[NodePair]> {
        match self {
            SearchOutcome::Found { path, .. } => Some(path),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub stats: SearchStats,
}

struct Label {
    cost: PairCost,
    parent: Option<NodePair>,
}

struct Ctx<'a> {
    dual: &'a DualRoadmap,
    r: [&'a Roadmap; 2],
    masks: [&'a ValidityMask; 2],
    blocked: &'a BlockedEdges,
    /// Per-arm heuristic: distance of every node to that arm's target node.
    h: [Vec<f64>; 2],
}

impl Ctx<'_> {
    fn h(&self, chain: ChainId, n: NodeId) -> f64 {
        self.h[chain.index()][n as usize]
    }

    fn step(&self, chain: ChainId, from: NodeId, to: NodeId) -> f64 {
        if from == to {
            0.0
        } else {
            self.r[chain.index()].distance(from, to)
        }
    }

    /// Usable successor: both nodes valid, no inter-arm contact, no blocked edge.
    fn admissible(&self, from: NodePair, to: NodePair) -> bool {
        self.masks[0].is_valid(to.arm1)
            && self.masks[1].is_valid(to.arm2)
            && self.h(ChainId::Arm1, to.arm1).is_finite()
            && self.h(ChainId::Arm2, to.arm2).is_finite()
            && !self.dual.inter_contains(to)
            && !self.blocked.transition_blocked(from, to)
    }

    /// Moves of one arm from `c` into torso cell `t`, including staying put
    /// when `c` already sits in `t`. Sorted by id.
    fn moves_into(&self, chain: ChainId, c: NodeId, t: u32, out: &mut Vec<NodeId>) {
        let r = self.r[chain.index()];
        out.clear();
        out.extend_from_slice(r.neighbors_by_torso(c, t));
        if r.torso_of(c) == t {
            let pos = out.partition_point(|&n| n < c);
            out.insert(pos, c);
        }
    }

    fn moves_with_self(&self, chain: ChainId, c: NodeId, out: &mut Vec<NodeId>) {
        out.clear();
        out.extend_from_slice(self.r[chain.index()].neighbors(c));
        let pos = out.partition_point(|&n| n < c);
        out.insert(pos, c);
    }

    /// Successors in generation order, each at most once.
    fn successors(&self, cur: NodePair, cost: PairCost, mode: SearchMode, scratch: &mut Scratch, out: &mut Vec<NodePair>) {
        out.clear();
        match mode {
            SearchMode::Exhaustive => {
                let r1 = self.r[0];
                self.moves_with_self(ChainId::Arm1, cur.arm1, &mut scratch.lead);
                for &n1 in &scratch.lead {
                    self.moves_into(ChainId::Arm2, cur.arm2, r1.torso_of(n1), &mut scratch.partner);
                    for &n2 in &scratch.partner {
                        let to = NodePair::new(n1, n2);
                        if to != cur && self.admissible(cur, to) {
                            out.push(to);
                        }
                    }
                }
            }
            SearchMode::Restricted => {
                scratch.seen.clear();
                for lead in ChainId::BOTH {
                    let follow = lead.other();
                    let c_lead = cur.get(lead);
                    let c_follow = cur.get(follow);
                    let g_follow = match follow {
                        ChainId::Arm1 => cost.g1,
                        ChainId::Arm2 => cost.g2,
                    };
                    let r_lead = self.r[lead.index()];
                    let fmask = self.masks[follow.index()];
                    self.moves_with_self(lead, c_lead, &mut scratch.lead);
                    // Follower candidates per torso cell, ordered by (f, id), so the
                    // first admissible one is the lowest-f partner with ties to the lowest id.
                    scratch.ranked.clear();
                    for &nl in &scratch.lead {
                        if !self.masks[lead.index()].is_valid(nl) || !self.h(lead, nl).is_finite() {
                            continue;
                        }
                        let t = r_lead.torso_of(nl);
                        let slot = match scratch.ranked.iter().position(|(ct, _)| *ct == t) {
                            Some(i) => i,
                            None => {
                                self.moves_into(follow, c_follow, t, &mut scratch.partner);
                                let mut list = scratch.spare.pop().unwrap_or_default();
                                list.clear();
                                list.extend(scratch.partner.iter().filter(|&&nf| fmask.is_valid(nf) && self.h(follow, nf).is_finite()).map(|&nf| {
                                    (g_follow + self.step(follow, c_follow, nf) + self.h(follow, nf), nf)
                                }));
                                list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                                scratch.ranked.push((t, list));
                                scratch.ranked.len() - 1
                            }
                        };
                        let best = scratch.ranked[slot].1.iter().find_map(|&(_, nf)| {
                            let to = match lead {
                                ChainId::Arm1 => NodePair::new(nl, nf),
                                ChainId::Arm2 => NodePair::new(nf, nl),
                            };
                            (to != cur && !self.dual.inter_contains(to) && !self.blocked.transition_blocked(cur, to))
                                .then_some(to)
                        });
                        if let Some(to) = best {
                            if scratch.seen.insert(to) {
                                out.push(to);
                            }
                        }
                    }
                    for (_, list) in scratch.ranked.drain(..) {
                        scratch.spare.push(list);
                    }
                }
            }
        }
    }
}

/// Reusable buffers for successor generation.
#[derive(Default)]
struct Scratch {
    lead: Vec<NodeId>,
    partner: Vec<NodeId>,
    ranked: Vec<(u32, Vec<(f64, NodeId)>)>,
    spare: Vec<Vec<(f64, NodeId)>>,
    seen: FxHashSet<NodePair>,
}

/// Searches the composed graph from `start` to `target`. Both endpoint pairs
/// must share a torso cell; if either is invalid under the masks or in
/// inter-arm contact the result is `NoPath`.
pub fn dual_graph_search(
    dual: &DualRoadmap,
    masks: [&ValidityMask; 2],
    blocked: &BlockedEdges,
    start: NodePair,
    target: NodePair,
    mode: SearchMode,
    limits: &SearchOptions,
) -> Result<SearchResult> {
    let mut stats = SearchStats::default();
    if dual.pair_in_collision(start, masks[0], masks[1])? || dual.pair_in_collision(target, masks[0], masks[1])? {
        return Ok(SearchResult {
            outcome: SearchOutcome::NoPath,
            stats,
        });
    }
    let ctx = Ctx {
        dual,
        r: [dual.roadmap(ChainId::Arm1), dual.roadmap(ChainId::Arm2)],
        masks,
        blocked,
        h: [ChainId::Arm1, ChainId::Arm2].map(|c| {
            heuristic_table(limits.heuristic, dual.roadmap(c), c, masks[c.index()], blocked, target.get(c))
        }),
    };
    let mut labels: FxHashMap<NodePair, Label> = FxHashMap::default();
    let mut heap = BinaryHeap::new();
    let zero = PairCost::default();
    labels.insert(start, Label { cost: zero, parent: None });
    heap.push(QueueEntry {
        key: QueueKey::new(ctx.h(ChainId::Arm1, start.arm1), ctx.h(ChainId::Arm2, start.arm2), zero, start),
        cost: zero,
    });
    stats.pairs_generated = 1;
    stats.queue_peak = 1;
    let mut succ = Vec::new();
    let mut scratch = Scratch::default();

    while let Some(QueueEntry { key, cost }) = heap.pop() {
        let cur = key.pair;
        let label = &labels[&cur];
        if label.cost.g1.to_bits() != cost.g1.to_bits() || label.cost.g2.to_bits() != cost.g2.to_bits() {
            continue;
        }
        if cur == target {
            let mut path = vec![cur];
            let mut at = cur;
            while let Some(p) = labels[&at].parent {
                path.push(p);
                at = p;
            }
            path.reverse();
            return Ok(SearchResult {
                outcome: SearchOutcome::Found { path, cost },
                stats,
            });
        }
        if stats.pairs_expanded >= limits.max_expansions
            || (stats.pairs_expanded % 256 == 0 && limits.deadline.is_some_and(|d| Instant::now() >= d))
        {
            return Ok(SearchResult {
                outcome: SearchOutcome::LimitExceeded,
                stats,
            });
        }
        stats.pairs_expanded += 1;
        ctx.successors(cur, cost, mode, &mut scratch, &mut succ);
        for &to in &succ {
            let next = PairCost {
                g1: cost.g1 + ctx.step(ChainId::Arm1, cur.arm1, to.arm1),
                g2: cost.g2 + ctx.step(ChainId::Arm2, cur.arm2, to.arm2),
            };
            let better = match labels.get(&to) {
                Some(l) => next.cmp_key(&l.cost) == Ordering::Less,
                None => true,
            };
            if !better {
                continue;
            }
            labels.insert(to, Label { cost: next, parent: Some(cur) });
            heap.push(QueueEntry {
                key: QueueKey::new(
                    next.g1 + ctx.h(ChainId::Arm1, to.arm1),
                    next.g2 + ctx.h(ChainId::Arm2, to.arm2),
                    next,
                    to,
                ),
                cost: next,
            });
            stats.pairs_generated += 1;
        }
        stats.queue_peak = stats.queue_peak.max(heap.len() as u64);
    }
    Ok(SearchResult {
        outcome: SearchOutcome::NoPath,
        stats,
    })
}

/// Per-arm costs of a pair path, summed edge by edge.
pub fn path_cost(dual: &DualRoadmap, path: &[NodePair]) -> PairCost {
    let (r1, r2) = (dual.roadmap(ChainId::Arm1), dual.roadmap(ChainId::Arm2));
    let mut c = PairCost::default();
    for w in path.windows(2) {
        if w[0].arm1 != w[1].arm1 {
            c.g1 += r1.distance(w[0].arm1, w[1].arm1);
        }
        if w[0].arm2 != w[1].arm2 {
            c.g2 += r2.distance(w[0].arm2, w[1].arm2);
        }
    }
    c
}
