//! Reference planners: the materialized product-graph oracle and the
//! leader-follower comparison planner.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::time::Instant;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::config::{path_length, ChainId, FullConfig};
use crate::dual::{DualRoadmap, NodePair};
use crate::error::{Error, Result};
use crate::kinematics::RobotModel;
use crate::planner::{self, FailureKind, PlanFailure, PlanRequest, PlanStats, Trajectory};
use crate::roadmap::{nearest_valid_nodes, NodeId, Roadmap, ValidityMask};
use crate::search::{heuristic_table, BlockedEdges, Dist, Heuristic, PairCost, SearchMode, QueueEntry, QueueKey, SearchOutcome, SearchResult, SearchStats};

/// The masked composed graph, built by brute force: every same-torso pair
/// that is valid and free of inter-arm contact, with explicit edge lists.
pub struct ProductGraph {
    pub pairs: Vec<NodePair>,
    index: FxHashMap<NodePair, u32>,
    offsets: Vec<usize>,
    edges: Vec<u32>,
}

impl ProductGraph {
    /// Fails with `PairBudgetExceeded` when the number of same-torso pairs
    /// exceeds `budget`; the check happens before anything is allocated.
    pub fn build(dual: &DualRoadmap, masks: [&ValidityMask; 2], blocked: &BlockedEdges, budget: u64) -> Result<Self> {
        let r1 = dual.roadmap(ChainId::Arm1);
        let r2 = dual.roadmap(ChainId::Arm2);
        let same_torso: u64 = (0..r1.torso_cell_count() as u32)
            .map(|t| r1.nodes_at_torso(t).len() as u64 * r2.nodes_at_torso(t).len() as u64)
            .sum();
        if same_torso > budget {
            return Err(Error::PairBudgetExceeded {
                pairs: same_torso,
                budget,
            });
        }
        let mut by_torso: FxHashMap<u32, Vec<NodeId>> = FxHashMap::default();
        for b in 0..r2.node_count() as NodeId {
            if masks[1].is_valid(b) {
                by_torso.entry(r2.torso_of(b)).or_default().push(b);
            }
        }
        let mut pairs = Vec::new();
        for a in 0..r1.node_count() as NodeId {
            if !masks[0].is_valid(a) {
                continue;
            }
            for &b in by_torso.get(&r1.torso_of(a)).map(Vec::as_slice).unwrap_or(&[]) {
                if !dual.inter_colliding_with_arm1(a).contains(&b) {
                    pairs.push(NodePair::new(a, b));
                }
            }
        }
        let index: FxHashMap<NodePair, u32> = pairs.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();
        let mut offsets = Vec::with_capacity(pairs.len() + 1);
        let mut edges = Vec::new();
        offsets.push(0);
        for &p in &pairs {
            let mut moves1 = r1.neighbors(p.arm1).to_vec();
            moves1.push(p.arm1);
            let mut moves2 = r2.neighbors(p.arm2).to_vec();
            moves2.push(p.arm2);
            let mut row = Vec::new();
            for &n1 in &moves1 {
                for &n2 in &moves2 {
                    let q = NodePair::new(n1, n2);
                    if q == p || blocked.transition_blocked(p, q) {
                        continue;
                    }
                    if let Some(&j) = index.get(&q) {
                        row.push(j);
                    }
                }
            }
            row.sort_unstable();
            edges.extend(row);
            offsets.push(edges.len());
        }
        Ok(Self {
            pairs,
            index,
            offsets,
            edges,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, pair: NodePair) -> Option<u32> {
        self.index.get(&pair).copied()
    }

    pub fn successors(&self, v: u32) -> &[u32] {
        &self.edges[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    /// Breadth-first reachability between two pairs.
    pub fn reachable(&self, start: NodePair, target: NodePair) -> bool {
        let (Some(s), Some(t)) = (self.vertex(start), self.vertex(target)) else {
            return false;
        };
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([s]);
        seen[s as usize] = true;
        while let Some(v) = queue.pop_front() {
            if v == t {
                return true;
            }
            for &w in self.successors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        false
    }
}

/// Best-first search on the materialized product graph with the same cost,
/// priority ordering and heuristic as the dual search.
pub fn product_astar(
    dual: &DualRoadmap,
    masks: [&ValidityMask; 2],
    blocked: &BlockedEdges,
    start: NodePair,
    target: NodePair,
    budget: u64,
    heuristic: Heuristic,
) -> Result<SearchResult> {
    let graph = ProductGraph::build(dual, masks, blocked, budget)?;
    let h = ChainId::BOTH.map(|c| heuristic_table(heuristic, dual.roadmap(c), c, masks[c.index()], blocked, target.get(c)));
    Ok(astar_on(dual, &graph, start, target, &h))
}

/// Full planner with product-graph A* in place of the dual search. Every
/// search materializes the product graph, so it fails with a budget error on
/// roadmaps whose same-torso pair count exceeds `product_pair_budget`.
pub fn product_oracle_plan(dual: &DualRoadmap, model: &RobotModel, req: &PlanRequest) -> std::result::Result<Trajectory, PlanFailure> {
    let mut req = req.clone();
    req.options.initial_mode = SearchMode::Exhaustive;
    planner::plan_with(dual, model, &req, &|masks, blocked, s, t, _, _| {
        match product_astar(dual, masks, blocked, s, t, req.options.product_pair_budget, req.options.heuristic) {
            Ok(r) => Ok(r),
            Err(Error::PairBudgetExceeded { .. }) => Err(FailureKind::BudgetExceeded("pairs")),
            Err(e) => Err(FailureKind::InvalidRequest(e.to_string())),
        }
    })
}

pub fn product_reachable(
    dual: &DualRoadmap,
    masks: [&ValidityMask; 2],
    blocked: &BlockedEdges,
    start: NodePair,
    target: NodePair,
    budget: u64,
) -> Result<bool> {
    Ok(ProductGraph::build(dual, masks, blocked, budget)?.reachable(start, target))
}

fn astar_on(dual: &DualRoadmap, graph: &ProductGraph, start: NodePair, target: NodePair, h: &[Vec<f64>; 2]) -> SearchResult {
    let mut stats = SearchStats::default();
    let (Some(s), Some(t)) = (graph.vertex(start), graph.vertex(target)) else {
        return SearchResult {
            outcome: SearchOutcome::NoPath,
            stats,
        };
    };
    let r1 = dual.roadmap(ChainId::Arm1);
    let r2 = dual.roadmap(ChainId::Arm2);
    let h = |p: NodePair| (h[0][p.arm1 as usize], h[1][p.arm2 as usize]);
    let n = graph.len();
    let mut cost: Vec<Option<PairCost>> = vec![None; n];
    let mut parent = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    cost[s as usize] = Some(PairCost::default());
    let (h1, h2) = h(start);
    heap.push(QueueEntry {
        key: QueueKey::new(h1, h2, PairCost::default(), start),
        cost: PairCost::default(),
    });
    stats.pairs_generated = 1;
    stats.queue_peak = 1;
    while let Some(QueueEntry { key, cost: c }) = heap.pop() {
        let v = graph.vertex(key.pair).expect("queued pairs are vertices");
        if cost[v as usize] != Some(c) {
            continue;
        }
        if v == t {
            let mut path = vec![key.pair];
            let mut at = v;
            while parent[at as usize] != u32::MAX {
                at = parent[at as usize];
                path.push(graph.pairs[at as usize]);
            }
            path.reverse();
            return SearchResult {
                outcome: SearchOutcome::Found { path, cost: c },
                stats,
            };
        }
        stats.pairs_expanded += 1;
        let p = key.pair;
        for &w in graph.successors(v) {
            let q = graph.pairs[w as usize];
            let (h1, h2) = h(q);
            if h1.is_infinite() || h2.is_infinite() {
                continue;
            }
            let next = PairCost {
                g1: c.g1 + if q.arm1 == p.arm1 { 0.0 } else { r1.distance(p.arm1, q.arm1) },
                g2: c.g2 + if q.arm2 == p.arm2 { 0.0 } else { r2.distance(p.arm2, q.arm2) },
            };
            if cost[w as usize].is_some_and(|old| next.cmp_key(&old) != Ordering::Less) {
                continue;
            }
            cost[w as usize] = Some(next);
            parent[w as usize] = v;
            heap.push(QueueEntry {
                key: QueueKey::new(next.g1 + h1, next.g2 + h2, next, q),
                cost: next,
            });
            stats.pairs_generated += 1;
        }
        stats.queue_peak = stats.queue_peak.max(heap.len() as u64);
    }
    SearchResult {
        outcome: SearchOutcome::NoPath,
        stats,
    }
}

fn single_astar(
    r: &Roadmap,
    mask: &ValidityMask,
    blocked: &BlockedEdges,
    start: NodeId,
    target: NodeId,
    stats: &mut SearchStats,
) -> Option<Vec<NodeId>> {
    if !mask.is_valid(start) || !mask.is_valid(target) {
        return None;
    }
    let chain = r.chain();
    let mut g: FxHashMap<NodeId, (f64, NodeId)> = FxHashMap::default();
    let mut heap = BinaryHeap::new();
    g.insert(start, (0.0, NodeId::MAX));
    heap.push(Reverse((Dist(r.distance(start, target)), start)));
    stats.pairs_generated += 1;
    while let Some(Reverse((Dist(f), n))) = heap.pop() {
        let gn = g[&n].0;
        if f > gn + r.distance(n, target) {
            continue;
        }
        if n == target {
            let mut path = vec![n];
            let mut at = n;
            while g[&at].1 != NodeId::MAX {
                at = g[&at].1;
                path.push(at);
            }
            path.reverse();
            return Some(path);
        }
        stats.pairs_expanded += 1;
        for &m in r.neighbors(n) {
            if !mask.is_valid(m) || blocked.arm_edge_blocked(chain, n, m) {
                continue;
            }
            let gm = gn + r.distance(n, m);
            if g.get(&m).is_some_and(|&(old, _)| old <= gm) {
                continue;
            }
            g.insert(m, (gm, n));
            heap.push(Reverse((Dist(gm + r.distance(m, target)), m)));
            stats.pairs_generated += 1;
        }
        stats.queue_peak = stats.queue_peak.max(heap.len() as u64);
    }
    None
}

/// Nodes popped by the follower's neighbor descent before giving up.
const FOLLOW_BUDGET: usize = 256;

/// Follower placement: starting from the arm2 node nearest to the desired
/// configuration in torso cell `torso`, best-first over same-torso neighbors
/// until a node is valid and clear of the leader node.
fn follow(dual: &DualRoadmap, mask: &ValidityMask, torso: u32, desired: &[f64], leader: NodeId) -> Option<NodeId> {
    let r2 = dual.roadmap(ChainId::Arm2);
    let mut best: Option<(f64, NodeId)> = None;
    for n in r2.nodes_at_torso(torso) {
        let d = r2.distance_to(n, desired);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, n));
        }
    }
    let (d0, n0) = best?;
    let mut seen = FxHashSet::default();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Dist(d0), n0)));
    seen.insert(n0);
    let mut pops = 0;
    while let Some(Reverse((_, n))) = heap.pop() {
        if mask.is_valid(n) && !dual.inter_contains(NodePair::new(leader, n)) {
            return Some(n);
        }
        pops += 1;
        if pops >= FOLLOW_BUDGET {
            break;
        }
        for &m in r2.neighbors_by_torso(n, torso) {
            if seen.insert(m) {
                heap.push(Reverse((Dist(r2.distance_to(m, desired)), m)));
            }
        }
    }
    None
}

fn follower_target(torso: &[f64], arm2: &[f64]) -> Vec<f64> {
    torso.iter().chain(arm2).copied().collect()
}

/// Leader anchor and follower node for an off-graph endpoint.
fn lf_connect(
    dual: &DualRoadmap,
    model: &RobotModel,
    masks: &[ValidityMask; 2],
    endpoint: &FullConfig,
    endpoint_first: bool,
    req: &PlanRequest,
) -> Option<NodePair> {
    let r1 = dual.roadmap(ChainId::Arm1);
    let c1: Vec<f64> = endpoint.chain(ChainId::Arm1).values().collect();
    for t in planner::torso_order(dual, &endpoint.torso) {
        for (a, _) in nearest_valid_nodes(r1, &masks[0], &c1, Some(t), req.options.connect_k) {
            let want = follower_target(r1.torso_values(a), &endpoint.arm2);
            let Some(b) = follow(dual, &masks[1], t, &want, a) else {
                continue;
            };
            let anchor = dual.compose(NodePair::new(a, b)).expect("same torso cell");
            let seg = if endpoint_first { [endpoint.clone(), anchor] } else { [anchor, endpoint.clone()] };
            if planner::validate_trajectory(model, &seg, &req.occupancy, req.options.resolution)
                .ok()
                .flatten()
                .is_none()
            {
                return Some(NodePair::new(a, b));
            }
        }
    }
    None
}

/// Comparison planner: arm 1 (with the torso) plans alone on its roadmap;
/// arm 2 tracks the straight joint-space line from its start to its target,
/// pushed to the nearest free node at the leader's torso cell. Failed edges
/// are repaired by blocking the leader's edge; there is no joint fallback.
pub fn leader_follower_plan(
    dual: &DualRoadmap,
    model: &RobotModel,
    req: &PlanRequest,
) -> std::result::Result<Trajectory, PlanFailure> {
    let t0 = Instant::now();
    let opts = &req.options;
    let deadline = opts.time_budget.map(|b| t0 + b);
    let mut stats = PlanStats::default();
    let fail = |kind: FailureKind, mut stats: PlanStats| {
        stats.timing.total = t0.elapsed().as_secs_f64();
        Err(PlanFailure { kind, stats })
    };
    let mut masks = match planner::prepare(dual, model, req) {
        Ok(m) => m,
        Err(kind) => return fail(kind, stats),
    };
    stats.timing.prune = t0.elapsed().as_secs_f64();
    let r1 = dual.roadmap(ChainId::Arm1);
    let mut blocked = BlockedEdges::new();

    while stats.iterations < opts.max_iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return fail(FailureKind::BudgetExceeded("time"), stats);
        }
        stats.iterations += 1;
        let tc = Instant::now();
        let s = lf_connect(dual, model, &masks, &req.start, true, req);
        let t = s.and_then(|_| lf_connect(dual, model, &masks, &req.target, false, req));
        stats.timing.connect += tc.elapsed().as_secs_f64();
        let Some(s) = s else {
            return fail(FailureKind::NoConnectableNode("start"), stats);
        };
        let Some(t) = t else {
            return fail(FailureKind::NoConnectableNode("target"), stats);
        };

        let ts = Instant::now();
        let leader = single_astar(r1, &masks[0], &blocked, s.arm1, t.arm1, &mut stats.search);
        stats.timing.search += ts.elapsed().as_secs_f64();
        let Some(leader) = leader else {
            return fail(FailureKind::NoPath, stats);
        };

        let mut along = vec![0.0];
        for w in leader.windows(2) {
            along.push(along.last().unwrap() + r1.distance(w[0], w[1]));
        }
        let total = *along.last().unwrap();
        let mut pairs = Vec::with_capacity(leader.len());
        let mut stuck = None;
        for (i, &a) in leader.iter().enumerate() {
            let b = if i == 0 {
                Some(s.arm2)
            } else if i + 1 == leader.len() {
                Some(t.arm2)
            } else {
                let frac = if total > 0.0 { along[i] / total } else { 1.0 };
                let arm2: Vec<f64> = req
                    .start
                    .arm2
                    .iter()
                    .zip(&req.target.arm2)
                    .map(|(x, y)| x + (y - x) * frac)
                    .collect();
                follow(dual, &masks[1], r1.torso_of(a), &follower_target(r1.torso_values(a), &arm2), a)
            };
            match b {
                Some(b) if !dual.inter_contains(NodePair::new(a, b)) => pairs.push(NodePair::new(a, b)),
                _ => {
                    stuck = Some(i);
                    break;
                }
            }
        }

        let tk = Instant::now();
        let mut repaired = None;
        if let Some(i) = stuck {
            repaired = Some(blocked.block_arm_edge(ChainId::Arm1, leader[i - 1], leader[i]));
        } else {
            for (i, w) in pairs.windows(2).enumerate() {
                let a = dual.compose(w[0]).expect("same torso cell");
                let b = dual.compose(w[1]).expect("same torso cell");
                let bad = planner::validate_trajectory(model, &[a, b], &req.occupancy, opts.resolution)
                    .ok()
                    .flatten();
                if let Some(v) = bad {
                    // Leader nodes always differ between consecutive pairs; an
                    // endpoint sample on the leader's own arm masks that node.
                    let near_end = v.sample == 0 || v.sample + 1 == v.samples;
                    let node = if v.sample == 0 { w[0].arm1 } else { w[1].arm1 };
                    repaired = Some(if near_end && v.condition == 4 {
                        masks[0].invalidate(node)
                    } else {
                        blocked.block_arm_edge(ChainId::Arm1, leader[i], leader[i + 1])
                    });
                    break;
                }
            }
        }
        stats.timing.check += tk.elapsed().as_secs_f64();
        match repaired {
            Some(true) => {
                stats.blocked_edges = blocked.len() as u32;
                stats.masked_nodes = (masks[0].invalid_count()) as u32;
                continue;
            }
            Some(false) => return fail(FailureKind::NoPath, stats),
            None => {}
        }

        let mut waypoints = vec![req.start.clone()];
        waypoints.extend(pairs.iter().map(|&p| dual.compose(p).expect("same torso cell")));
        waypoints.push(req.target.clone());
        waypoints.dedup();
        if opts.shortcut {
            let tsc = Instant::now();
            waypoints = planner::shortcut(model, &waypoints, &req.occupancy, opts.resolution);
            waypoints.dedup();
            stats.timing.shortcut = tsc.elapsed().as_secs_f64();
        }
        stats.timing.total = t0.elapsed().as_secs_f64();
        let cost = path_length(dual.weights(), &waypoints);
        return Ok(Trajectory { waypoints, cost, stats });
    }
    fail(FailureKind::BudgetExceeded("iterations"), stats)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::demo;
    use crate::dual::{build_dual, DualParams};
    use crate::roadmap::JointGrid;
    use crate::search::{dual_graph_search, SearchOptions, SearchMode};
    use crate::voxel::{OccupancySet, VoxelGrid};

    fn tiny(torso: Vec<f64>, arm: Vec<f64>) -> DualRoadmap {
        let m = demo::tiny_description().into_model().unwrap();
        let grid = VoxelGrid::new([-0.6, -0.6, 0.0], 0.1, [12, 12, 10]).unwrap();
        let a = JointGrid::from_values(vec![arm]).unwrap();
        build_dual(&m, JointGrid::from_values(vec![torso]).unwrap(), [a.clone(), a], &grid, &DualParams::for_model(&m, &grid), None)
            .unwrap()
    }

    #[test]
    fn free_space_cost_is_grid_path_length() {
        // One torso value, four arm values: arm1 walks three steps.
        let step = PI / 6.0;
        let d = tiny(vec![0.0], vec![-2.0 * step, -step, 0.0, step]);
        let masks = [ValidityMask::all_valid(4), ValidityMask::all_valid(4)];
        let res = product_astar(&d, [&masks[0], &masks[1]], &BlockedEdges::new(), NodePair::new(0, 0), NodePair::new(3, 0), 1000, Heuristic::ChainMetric).unwrap();
        let SearchOutcome::Found { path, cost } = res.outcome else { panic!() };
        assert_eq!(path.len(), 4);
        assert!((cost.g1 - (step + step + step)).abs() < 1e-12);
        assert_eq!(cost.g2, 0.0);
    }

    #[test]
    fn walled_corridor_unreachable() {
        let d = tiny(vec![0.0], vec![-PI / 6.0, 0.0, PI / 6.0]);
        let mut masks = [ValidityMask::all_valid(3), ValidityMask::all_valid(3)];
        masks[0].invalidate(1);
        let b = BlockedEdges::new();
        let mm = [&masks[0], &masks[1]];
        let s = NodePair::new(0, 1);
        let t = NodePair::new(2, 1);
        assert!(!product_reachable(&d, mm, &b, s, t, 1000).unwrap());
        assert_eq!(product_astar(&d, mm, &b, s, t, 1000, Heuristic::default()).unwrap().outcome, SearchOutcome::NoPath);
        let ex = dual_graph_search(&d, mm, &b, s, t, SearchMode::Exhaustive, &SearchOptions::default()).unwrap();
        assert_eq!(ex.outcome, SearchOutcome::NoPath);
    }

    #[test]
    fn budget_enforced() {
        let d = tiny(vec![0.0, PI / 6.0], vec![0.0, PI / 6.0]);
        let masks = [ValidityMask::all_valid(4), ValidityMask::all_valid(4)];
        let err = ProductGraph::build(&d, [&masks[0], &masks[1]], &BlockedEdges::new(), 7).err().unwrap();
        assert!(matches!(err, Error::PairBudgetExceeded { pairs: 8, budget: 7 }));
    }

    #[test]
    fn vertices_are_exactly_the_free_pairs() {
        let d = tiny(vec![0.0, PI / 6.0], vec![-PI / 3.0, -PI / 6.0, 0.0, PI / 6.0, PI / 3.0]);
        let occ = OccupancySet::from_ids(d.voxel_grid(), [500, 501, 502, 610]).unwrap();
        let [m1, m2] = d.collision_masks(&occ).unwrap();
        let g = ProductGraph::build(&d, [&m1, &m2], &BlockedEdges::new(), 10_000).unwrap();
        let r1 = d.roadmap(ChainId::Arm1);
        let r2 = d.roadmap(ChainId::Arm2);
        let mut expect = 0;
        for a in 0..r1.node_count() as NodeId {
            for b in 0..r2.node_count() as NodeId {
                let p = NodePair::new(a, b);
                let free = d.same_torso(p) && !d.pair_in_collision(p, &m1, &m2).unwrap();
                assert_eq!(g.vertex(p).is_some(), free);
                expect += free as usize;
            }
        }
        assert_eq!(g.len(), expect);
    }

    #[test]
    fn leader_follower_free_space() {
        use crate::planner::{validate_trajectory, PlanOptions};
        let m = demo::mini_description().into_model().unwrap();
        let grid = VoxelGrid::new([-0.8, -0.8, 0.0], 0.1, [16, 16, 12]).unwrap();
        let (t, a) = crate::dual::uniform_grids(&m, PI / 6.0, PI / 6.0, &Default::default()).unwrap();
        let d = build_dual(&m, t, a, &grid, &DualParams::for_model(&m, &grid), None).unwrap();
        let occ = OccupancySet::empty(&grid);
        let s = FullConfig::new(vec![0.0, 0.0], vec![PI / 6.0, 0.0], vec![-PI / 6.0, 0.0]);
        let g = FullConfig::new(vec![PI / 6.0, 0.3], vec![PI / 2.0, -0.4], vec![-PI / 6.0, 0.0]);
        let req = PlanRequest {
            start: s.clone(),
            target: g.clone(),
            occupancy: occ.clone(),
            options: PlanOptions { resolution: 0.01, ..PlanOptions::default() },
        };
        let traj = leader_follower_plan(&d, &m, &req).unwrap();
        assert_eq!(traj.waypoints.first(), Some(&s));
        assert_eq!(traj.waypoints.last(), Some(&g));
        assert!(validate_trajectory(&m, &traj.waypoints, &occ, 0.01).unwrap().is_none());
    }
}
