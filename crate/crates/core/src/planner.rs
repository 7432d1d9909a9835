//! Online query: prune, connect the endpoints, search, verify lazily, repair,
//! shortcut.

use std::path::Path;
use std::time::{Duration, Instant};

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::config::{path_length, ChainId, FullConfig};
use crate::dual::{DualRoadmap, NodePair};
use crate::error::{Error, Result};
use crate::kinematics::{CollisionCondition, RobotModel};
use crate::roadmap::{nearest_valid_nodes, ValidityMask};
use crate::search::{
    dual_graph_search, BlockedEdges, Heuristic, SearchMode, SearchOptions, SearchOutcome, SearchResult, SearchStats,
};
use crate::voxel::OccupancySet;

/// Samples within this fraction of a segment end blame the node, not the edge.
const NODE_BLAME_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanOptions {
    /// Largest per-joint change between consecutive edge samples.
    pub resolution: f64,
    pub max_iterations: u32,
    #[serde(with = "opt_secs")]
    pub time_budget: Option<Duration>,
    pub shortcut: bool,
    pub initial_mode: SearchMode,
    /// Failed lazy-check rounds tolerated in restricted mode before escalating.
    pub restricted_retries: u32,
    /// Candidate anchor nodes per arm and torso cell when connecting endpoints.
    pub connect_k: usize,
    pub max_expansions: u64,
    pub heuristic: Heuristic,
    /// Same-torso pair cap for the product-graph oracle planner.
    pub product_pair_budget: u64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            resolution: 0.01,
            max_iterations: 64,
            time_budget: None,
            shortcut: true,
            initial_mode: SearchMode::Restricted,
            restricted_retries: 2,
            connect_k: 6,
            max_expansions: SearchOptions::default().max_expansions,
            heuristic: Heuristic::default(),
            product_pair_budget: 2_000_000,
        }
    }
}

mod opt_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map(Duration::from_secs_f64))
    }
}

#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub start: FullConfig,
    pub target: FullConfig,
    pub occupancy: OccupancySet,
    pub options: PlanOptions,
}

/// Wall-clock seconds spent per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub prune: f64,
    pub connect: f64,
    pub search: f64,
    pub check: f64,
    pub shortcut: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub search: SearchStats,
    pub iterations: u32,
    pub blocked_edges: u32,
    pub masked_nodes: u32,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<FullConfig>,
    /// Path length under the full-space metric.
    pub cost: f64,
    pub stats: PlanStats,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailureKind {
    StartInCollision(CollisionCondition),
    TargetInCollision(CollisionCondition),
    /// No valid anchor pair reachable by a free straight segment.
    NoConnectableNode(&'static str),
    NoPath,
    /// Iteration cap, time budget or expansion limit hit.
    BudgetExceeded(&'static str),
    InvalidRequest(String),
}

impl FailureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FailureKind::StartInCollision(_) => "StartInCollision",
            FailureKind::TargetInCollision(_) => "TargetInCollision",
            FailureKind::NoConnectableNode(_) => "NoConnectableNode",
            FailureKind::NoPath => "NoPath",
            FailureKind::BudgetExceeded(_) => "BudgetExceeded",
            FailureKind::InvalidRequest(_) => "InvalidRequest",
        }
    }
}

impl std::fmt::Display for FailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureKind::StartInCollision(c) => write!(f, "start configuration in collision ({c})"),
            FailureKind::TargetInCollision(c) => write!(f, "target configuration in collision ({c})"),
            FailureKind::NoConnectableNode(which) => write!(f, "no connectable roadmap node for the {which}"),
            FailureKind::NoPath => write!(f, "no collision-free path in the roadmap"),
            FailureKind::BudgetExceeded(what) => write!(f, "planning budget exceeded: {what}"),
            FailureKind::InvalidRequest(msg) => write!(f, "invalid request: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanFailure {
    pub kind: FailureKind,
    pub stats: PlanStats,
}

impl std::fmt::Display for PlanFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.kind.fmt(f)
    }
}

impl std::error::Error for PlanFailure {}

/// Number of sub-steps for a segment: the largest joint change divided by
/// `resolution`, rounded up, at least one.
pub fn segment_steps(a: &FullConfig, b: &FullConfig, resolution: f64) -> usize {
    ((a.max_abs_diff(b) / resolution).ceil() as usize).max(1)
}

/// `steps + 1` samples from `a` to `b`, both endpoints included exactly.
pub fn segment_sample(a: &FullConfig, b: &FullConfig, k: usize, steps: usize) -> FullConfig {
    if k == steps {
        b.clone()
    } else {
        a.lerp(b, k as f64 / steps as f64)
    }
}

/// First colliding sample on a segment: (fraction along the segment, condition).
fn segment_violation(
    model: &RobotModel,
    a: &FullConfig,
    b: &FullConfig,
    occupancy: &OccupancySet,
    resolution: f64,
) -> Option<(usize, usize, CollisionCondition)> {
    let steps = segment_steps(a, b, resolution);
    (0..=steps).find_map(|k| {
        let q = segment_sample(a, b, k, steps);
        model
            .collision_condition_unchecked(&q, occupancy, 0.0)
            .map(|c| (k, steps, c))
    })
}

fn segment_free(model: &RobotModel, a: &FullConfig, b: &FullConfig, occupancy: &OccupancySet, resolution: f64) -> bool {
    segment_violation(model, a, b, occupancy, resolution).is_none()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Index of the segment's first waypoint.
    pub segment: usize,
    pub sample: usize,
    pub samples: usize,
    pub config: FullConfig,
    /// Collision condition number, 1 (inter-arm) to 5 (arm 2 vs voxels).
    pub condition: u8,
    pub description: String,
}

/// Samples every segment at `resolution` (endpoints included) and reports
/// the first colliding configuration. Sphere padding is zero here.
pub fn validate_trajectory(
    model: &RobotModel,
    waypoints: &[FullConfig],
    occupancy: &OccupancySet,
    resolution: f64,
) -> Result<Option<Violation>> {
    if waypoints.is_empty() {
        return Err(Error::Input("trajectory has no waypoints".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::Input(format!("resolution must be positive, got {resolution}")));
    }
    for w in waypoints {
        model.check_full(w)?;
    }
    let single = [waypoints[0].clone(), waypoints[0].clone()];
    let segs: Vec<&[FullConfig]> = if waypoints.len() == 1 {
        vec![&single[..]]
    } else {
        waypoints.windows(2).collect()
    };
    for (i, seg) in segs.into_iter().enumerate() {
        if let Some((k, steps, c)) = segment_violation(model, &seg[0], &seg[1], occupancy, resolution) {
            return Ok(Some(Violation {
                segment: i,
                sample: k,
                samples: steps + 1,
                config: segment_sample(&seg[0], &seg[1], k, steps),
                condition: c.number(),
                description: c.to_string(),
            }));
        }
    }
    Ok(None)
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest later
/// waypoint reachable by a free straight segment.
pub fn shortcut(model: &RobotModel, waypoints: &[FullConfig], occupancy: &OccupancySet, resolution: f64) -> Vec<FullConfig> {
    if waypoints.len() <= 2 {
        return waypoints.to_vec();
    }
    let mut out = vec![waypoints[0].clone()];
    let mut i = 0;
    while i + 1 < waypoints.len() {
        let mut next = i + 1;
        for j in (i + 2..waypoints.len()).rev() {
            if segment_free(model, &waypoints[i], &waypoints[j], occupancy, resolution) {
                next = j;
                break;
            }
        }
        out.push(waypoints[next].clone());
        i = next;
    }
    out
}

fn dedup(waypoints: Vec<FullConfig>) -> Vec<FullConfig> {
    let mut out: Vec<FullConfig> = Vec::with_capacity(waypoints.len());
    for w in waypoints {
        if out.last() != Some(&w) {
            out.push(w);
        }
    }
    out
}

/// Shared request checks. Returns the two padded-roadmap masks.
pub(crate) fn prepare(
    dual: &DualRoadmap,
    model: &RobotModel,
    req: &PlanRequest,
) -> std::result::Result<[ValidityMask; 2], FailureKind> {
    let invalid = |e: Error| FailureKind::InvalidRequest(e.to_string());
    if !(req.options.resolution > 0.0) {
        return Err(FailureKind::InvalidRequest("resolution must be positive".into()));
    }
    if req.options.max_iterations == 0 {
        return Err(FailureKind::InvalidRequest("iteration cap must be at least 1".into()));
    }
    if model.torso_dof() != dual.torso_grid().dof()
        || model.arm_dof(ChainId::Arm1) + model.torso_dof() != dual.roadmap(ChainId::Arm1).dof()
        || model.arm_dof(ChainId::Arm2) + model.torso_dof() != dual.roadmap(ChainId::Arm2).dof()
    {
        return Err(FailureKind::InvalidRequest("robot model does not match the roadmap".into()));
    }
    model.check_full(&req.start).map_err(invalid)?;
    model.check_full(&req.target).map_err(invalid)?;
    if let Some(c) = model.collision_condition_unchecked(&req.start, &req.occupancy, 0.0) {
        return Err(FailureKind::StartInCollision(c));
    }
    if let Some(c) = model.collision_condition_unchecked(&req.target, &req.occupancy, 0.0) {
        return Err(FailureKind::TargetInCollision(c));
    }
    dual.collision_masks(&req.occupancy).map_err(invalid)
}

/// Torso cells ordered by torso distance to `torso`, ties by index.
pub(crate) fn torso_order(dual: &DualRoadmap, torso: &[f64]) -> Vec<u32> {
    let r1 = dual.roadmap(ChainId::Arm1);
    let grid = dual.torso_grid();
    let mut cells: Vec<(f64, u32)> = (0..grid.cell_count() as u32)
        .map(|t| (r1.torso_distance(&grid.values_of(t as usize), torso), t))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cells.into_iter().map(|(_, t)| t).collect()
}

/// Anchor pair for an off-graph endpoint: first torso cell (by torso
/// distance) holding a valid, non-colliding pair among the k nearest nodes of
/// each arm whose straight segment to the endpoint is free. The segment is
/// sampled in travel direction: endpoint first for the start, anchor first
/// for the target.
fn connect(
    dual: &DualRoadmap,
    model: &RobotModel,
    masks: &[ValidityMask; 2],
    endpoint: &FullConfig,
    endpoint_first: bool,
    occupancy: &OccupancySet,
    opts: &PlanOptions,
    order: &[u32],
) -> Option<NodePair> {
    let (r1, r2) = (dual.roadmap(ChainId::Arm1), dual.roadmap(ChainId::Arm2));
    let c1: Vec<f64> = endpoint.chain(ChainId::Arm1).values().collect();
    let c2: Vec<f64> = endpoint.chain(ChainId::Arm2).values().collect();
    for &t in order {
        let near1 = nearest_valid_nodes(r1, &masks[0], &c1, Some(t), opts.connect_k);
        if near1.is_empty() {
            continue;
        }
        let near2 = nearest_valid_nodes(r2, &masks[1], &c2, Some(t), opts.connect_k);
        let mut cands: Vec<(f64, f64, NodePair)> = near1
            .iter()
            .flat_map(|&(a, da)| near2.iter().map(move |&(b, db)| (da.max(db), da + db, NodePair::new(a, b))))
            .collect();
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, _, pair) in cands {
            if dual.inter_contains(pair) {
                continue;
            }
            let anchor = dual.compose(pair).expect("same torso cell");
            let (a, b) = if endpoint_first { (endpoint, &anchor) } else { (&anchor, endpoint) };
            if segment_free(model, a, b, occupancy, opts.resolution) {
                return Some(pair);
            }
        }
    }
    None
}

struct Repair<'a> {
    masks: &'a mut [ValidityMask; 2],
    blocked: &'a mut BlockedEdges,
    masked: u32,
    blocked_count: u32,
}

impl Repair<'_> {
    /// Records the blame for a collision on the transition `from -> to`.
    /// Returns false if nothing new could be excluded.
    fn blame(&mut self, from: NodePair, to: NodePair, fraction: f64, cond: CollisionCondition) -> bool {
        let chain = match cond.chain() {
            Some(c) => c,
            None => return self.block_pair(from, to),
        };
        let moved = from.get(chain) != to.get(chain);
        if fraction <= NODE_BLAME_FRACTION || fraction >= 1.0 - NODE_BLAME_FRACTION {
            let node = if fraction <= NODE_BLAME_FRACTION { from } else { to }.get(chain);
            if self.masks[chain.index()].invalidate(node) {
                self.masked += 1;
                return true;
            }
        }
        if moved && self.blocked.block_arm_edge(chain, from.get(chain), to.get(chain)) {
            self.blocked_count += 1;
            return true;
        }
        self.block_pair(from, to)
    }

    fn block_pair(&mut self, from: NodePair, to: NodePair) -> bool {
        let added = self.blocked.block_transition(from, to);
        self.blocked_count += added as u32;
        added
    }
}

/// Graph search used inside the planning loop.
pub(crate) type SearchFn<'a> =
    dyn Fn([&ValidityMask; 2], &BlockedEdges, NodePair, NodePair, SearchMode, &SearchOptions) -> std::result::Result<SearchResult, FailureKind> + 'a;

/// Plans a whole-body trajectory from `req.start` to `req.target`.
pub fn plan(dual: &DualRoadmap, model: &RobotModel, req: &PlanRequest) -> std::result::Result<Trajectory, PlanFailure> {
    plan_with(dual, model, req, &|masks, blocked, s, t, mode, limits| {
        Ok(dual_graph_search(dual, masks, blocked, s, t, mode, limits).expect("anchor pairs share a torso cell"))
    })
}

pub(crate) fn plan_with(
    dual: &DualRoadmap,
    model: &RobotModel,
    req: &PlanRequest,
    search: &SearchFn<'_>,
) -> std::result::Result<Trajectory, PlanFailure> {
    let t0 = Instant::now();
    let opts = &req.options;
    let deadline = opts.time_budget.map(|b| t0 + b);
    let mut stats = PlanStats::default();
    let fail = |kind: FailureKind, mut stats: PlanStats| {
        stats.timing.total = t0.elapsed().as_secs_f64();
        Err(PlanFailure { kind, stats })
    };

    let mut masks = match prepare(dual, model, req) {
        Ok(m) => m,
        Err(kind) => return fail(kind, stats),
    };
    stats.timing.prune = t0.elapsed().as_secs_f64();
    let occ = &req.occupancy;
    let start_order = torso_order(dual, &req.start.torso);
    let target_order = torso_order(dual, &req.target.torso);

    let mut blocked = BlockedEdges::new();
    let mut verified: FxHashSet<(NodePair, NodePair)> = FxHashSet::default();
    let mut mode = opts.initial_mode;
    let mut restricted_failures = 0;
    let mut repair_masked = 0;
    let mut repair_blocked = 0;

    while stats.iterations < opts.max_iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return fail(FailureKind::BudgetExceeded("time"), stats);
        }
        stats.iterations += 1;

        let tc = Instant::now();
        let s_pair = connect(dual, model, &masks, &req.start, true, occ, opts, &start_order);
        let t_pair = s_pair.and_then(|_| connect(dual, model, &masks, &req.target, false, occ, opts, &target_order));
        stats.timing.connect += tc.elapsed().as_secs_f64();
        let Some(s_pair) = s_pair else {
            return fail(FailureKind::NoConnectableNode("start"), stats);
        };
        let Some(t_pair) = t_pair else {
            return fail(FailureKind::NoConnectableNode("target"), stats);
        };

        let ts = Instant::now();
        let limits = SearchOptions {
            max_expansions: opts.max_expansions,
            deadline,
            heuristic: opts.heuristic,
        };
        let res = match search([&masks[0], &masks[1]], &blocked, s_pair, t_pair, mode, &limits) {
            Ok(r) => r,
            Err(kind) => return fail(kind, stats),
        };
        stats.timing.search += ts.elapsed().as_secs_f64();
        stats.search.absorb(&res.stats);
        let path = match res.outcome {
            SearchOutcome::Found { path, .. } => path,
            SearchOutcome::NoPath if mode == SearchMode::Restricted => {
                mode = SearchMode::Exhaustive;
                stats.search.fallback_used += 1;
                continue;
            }
            SearchOutcome::NoPath => return fail(FailureKind::NoPath, stats),
            SearchOutcome::LimitExceeded => {
                let what = if deadline.is_some_and(|d| Instant::now() >= d) { "time" } else { "expansions" };
                return fail(FailureKind::BudgetExceeded(what), stats);
            }
        };

        let tk = Instant::now();
        let mut repair = Repair {
            masks: &mut masks,
            blocked: &mut blocked,
            masked: 0,
            blocked_count: 0,
        };
        let mut clean = true;
        for w in path.windows(2) {
            let key = (w[0], w[1]);
            if verified.contains(&key) {
                continue;
            }
            let a = dual.compose(w[0]).expect("search keeps torso cells equal");
            let b = dual.compose(w[1]).expect("search keeps torso cells equal");
            match segment_violation(model, &a, &b, occ, opts.resolution) {
                None => {
                    verified.insert(key);
                }
                Some((k, steps, cond)) => {
                    clean = false;
                    if !repair.blame(w[0], w[1], k as f64 / steps as f64, cond) {
                        stats.timing.check += tk.elapsed().as_secs_f64();
                        return fail(FailureKind::NoPath, stats);
                    }
                    break;
                }
            }
        }
        repair_masked += repair.masked;
        repair_blocked += repair.blocked_count;
        stats.masked_nodes = repair_masked;
        stats.blocked_edges = repair_blocked;
        stats.timing.check += tk.elapsed().as_secs_f64();
        if !clean {
            if mode == SearchMode::Restricted {
                restricted_failures += 1;
                if restricted_failures > opts.restricted_retries {
                    mode = SearchMode::Exhaustive;
                    stats.search.fallback_used += 1;
                }
            }
            continue;
        }

        let mut waypoints = vec![req.start.clone()];
        waypoints.extend(path.iter().map(|&p| dual.compose(p).expect("same torso cell")));
        waypoints.push(req.target.clone());
        let mut waypoints = dedup(waypoints);
        if opts.shortcut {
            let tsc = Instant::now();
            waypoints = dedup(shortcut(model, &waypoints, occ, opts.resolution));
            stats.timing.shortcut = tsc.elapsed().as_secs_f64();
        }
        stats.timing.total = t0.elapsed().as_secs_f64();
        let cost = path_length(dual.weights(), &waypoints);
        return Ok(Trajectory { waypoints, cost, stats });
    }
    fail(FailureKind::BudgetExceeded("iterations"), stats)
}

/// On-disk trajectory: waypoints plus planning metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub format_version: u32,
    pub planner: String,
    pub cost: f64,
    pub waypoints: Vec<FullConfig>,
    #[serde(default)]
    pub stats: Option<PlanStats>,
}

impl TrajectoryFile {
    pub const VERSION: u32 = 1;

    pub fn new(planner: &str, traj: &Trajectory) -> Self {
        Self {
            format_version: Self::VERSION,
            planner: planner.into(),
            cost: traj.cost,
            waypoints: traj.waypoints.clone(),
            stats: Some(traj.stats),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if f.format_version != Self::VERSION {
            return Err(Error::FileFormat(format!(
                "{}: trajectory format version {} (expected {})",
                path.display(),
                f.format_version,
                Self::VERSION
            )));
        }
        if f.waypoints.is_empty() {
            return Err(Error::FileFormat(format!("{}: trajectory has no waypoints", path.display())));
        }
        Ok(f)
    }
}
