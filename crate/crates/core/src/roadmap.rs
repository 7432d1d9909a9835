//! Single-chain dynamic roadmap over a uniform joint grid.
//!
//! A roadmap stores three maps: node id to configuration, node id to sorted
//! neighbor ids, and voxel id to the sorted ids of nodes that collide when
//! that voxel is active. Node ids are assigned torso-cell major, so the nodes
//! sharing a torso cell form one contiguous id range and every sorted
//! neighbor list is grouped by torso cell.

use std::ops::Range;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use crate::config::{weighted_distance, ChainConfig, ChainId};
use crate::error::{Error, Result};
use crate::kinematics::{ConstraintHook, RobotModel};
use crate::voxel::{OccupancySet, VoxelGrid, VoxelId};

pub type NodeId = u32;

const RANGE_EPS: f64 = 1e-9;

/// Per-joint lists of discrete values. Cells are enumerated in mixed radix
/// with the last joint varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGrid {
    values: Vec<Vec<f64>>,
}

impl JointGrid {
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        for (j, v) in values.iter().enumerate() {
            if v.is_empty() {
                return Err(Error::Input(format!("joint {j} has no grid values")));
            }
            if v.windows(2).any(|w| !(w[0] < w[1])) || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input(format!(
                    "joint {j} grid values must be finite and strictly increasing"
                )));
            }
        }
        Ok(Self { values })
    }

    /// `lo, lo + step, ...` up to `hi` for every joint. Values are computed as
    /// `lo + k * step` so that equal inputs give bit-identical grids.
    pub fn uniform(ranges: &[[f64; 2]], steps: &[f64]) -> Result<Self> {
        if ranges.len() != steps.len() {
            return Err(Error::Input(format!(
                "{} ranges but {} steps",
                ranges.len(),
                steps.len()
            )));
        }
        let mut values = Vec::with_capacity(ranges.len());
        for (j, (&[lo, hi], &step)) in ranges.iter().zip(steps).enumerate() {
            if !(step > 0.0) || !step.is_finite() {
                return Err(Error::Input(format!(
                    "joint {j}: discretization step must be positive, got {step}"
                )));
            }
            if !(lo <= hi) {
                return Err(Error::Input(format!("joint {j}: empty range [{lo}, {hi}]")));
            }
            let count = ((hi - lo) / step + RANGE_EPS).floor() as usize + 1;
            values.push((0..count).map(|k| (lo + k as f64 * step).min(hi)).collect());
        }
        Self::from_values(values)
    }

    pub fn dof(&self) -> usize {
        self.values.len()
    }

    pub fn joint_values(&self, joint: usize) -> &[f64] {
        &self.values[joint]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.values.iter().map(Vec::len).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    pub fn digits(&self, mut cell: usize, out: &mut [usize]) {
        for j in (0..self.values.len()).rev() {
            let n = self.values[j].len();
            out[j] = cell % n;
            cell /= n;
        }
    }

    pub fn cell(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.values)
            .fold(0, |acc, (d, v)| acc * v.len() + d)
    }

    pub fn values_of(&self, cell: usize) -> Vec<f64> {
        let mut digits = vec![0; self.dof()];
        self.digits(cell, &mut digits);
        digits.iter().zip(&self.values).map(|(&d, v)| v[d]).collect()
    }

    /// Cell whose values equal `values` exactly, if any.
    pub fn find(&self, values: &[f64]) -> Option<usize> {
        if values.len() != self.dof() {
            return None;
        }
        let mut digits = Vec::with_capacity(values.len());
        for (x, v) in values.iter().zip(&self.values) {
            digits.push(v.iter().position(|y| y.to_bits() == x.to_bits())?);
        }
        Some(self.cell(&digits))
    }
}

/// Parameters that shape a roadmap beyond its grids.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadmapParams {
    /// Inflation of every robot sphere when filling the voxel collision map.
    pub padding: f64,
    /// Neighbors differ by exactly one grid step in at most this many joints.
    pub max_moving_joints: usize,
    /// Weights of the chain metric, torso joints first.
    pub weights: Vec<f64>,
    /// Upper bound on candidate nodes (grid product) before any work is done.
    pub node_cap: usize,
}

impl RoadmapParams {
    pub const DEFAULT_NODE_CAP: usize = 2_000_000;

    /// Defaults: padding of half a voxel, two moving joints, unit weights.
    pub fn for_grid(grid: &VoxelGrid, chain_dof: usize) -> Self {
        Self {
            padding: 0.5 * grid.voxel_size,
            max_moving_joints: 2,
            weights: vec![1.0; chain_dof],
            node_cap: Self::DEFAULT_NODE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roadmap {
    pub(crate) chain: ChainId,
    pub(crate) torso_grid: Arc<JointGrid>,
    pub(crate) arm_grid: JointGrid,
    pub(crate) params: RoadmapParams,
    pub(crate) grid: VoxelGrid,
    /// Packed joint values, `dof` per node, torso first.
    pub(crate) configs: Vec<f64>,
    /// `torso_offsets[t]..torso_offsets[t + 1]` are the nodes in torso cell `t`.
    pub(crate) torso_offsets: Vec<NodeId>,
    pub(crate) torso_of: Vec<u32>,
    pub(crate) adj_offsets: Vec<usize>,
    pub(crate) adj: Vec<NodeId>,
    pub(crate) coll_offsets: Vec<usize>,
    pub(crate) coll_nodes: Vec<NodeId>,
}

impl Roadmap {
    pub fn chain(&self) -> ChainId {
        self.chain
    }

    pub fn torso_grid(&self) -> &Arc<JointGrid> {
        &self.torso_grid
    }

    pub fn arm_grid(&self) -> &JointGrid {
        &self.arm_grid
    }

    pub fn params(&self) -> &RoadmapParams {
        &self.params
    }

    pub fn voxel_grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn dof(&self) -> usize {
        self.torso_grid.dof() + self.arm_grid.dof()
    }

    pub fn node_count(&self) -> usize {
        self.torso_of.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn torso_cell_count(&self) -> usize {
        self.torso_offsets.len() - 1
    }

    /// Total number of (voxel, node) entries in the collision map.
    pub fn collision_entries(&self) -> usize {
        self.coll_nodes.len()
    }

    pub fn config(&self, node: NodeId) -> &[f64] {
        let d = self.dof();
        &self.configs[node as usize * d..(node as usize + 1) * d]
    }

    pub fn torso_values(&self, node: NodeId) -> &[f64] {
        &self.config(node)[..self.torso_grid.dof()]
    }

    pub fn arm_values(&self, node: NodeId) -> &[f64] {
        &self.config(node)[self.torso_grid.dof()..]
    }

    pub fn chain_config(&self, node: NodeId) -> ChainConfig {
        ChainConfig::new(self.torso_values(node).to_vec(), self.arm_values(node).to_vec())
    }

    pub fn torso_of(&self, node: NodeId) -> u32 {
        self.torso_of[node as usize]
    }

    pub fn nodes_at_torso(&self, torso: u32) -> Range<NodeId> {
        self.torso_offsets[torso as usize]..self.torso_offsets[torso as usize + 1]
    }

    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adj[self.adj_offsets[node as usize]..self.adj_offsets[node as usize + 1]]
    }

    /// Neighbors of `node` lying in torso cell `torso`: a contiguous slice of
    /// the sorted neighbor list, found by binary search. Never contains `node`.
    pub fn neighbors_by_torso(&self, node: NodeId, torso: u32) -> &[NodeId] {
        let all = self.neighbors(node);
        let range = self.nodes_at_torso(torso);
        let lo = all.partition_point(|&n| n < range.start);
        let hi = lo + all[lo..].partition_point(|&n| n < range.end);
        &all[lo..hi]
    }

    /// Nodes that collide when voxel `voxel` is active.
    pub fn colliding_nodes(&self, voxel: VoxelId) -> &[NodeId] {
        &self.coll_nodes[self.coll_offsets[voxel as usize]..self.coll_offsets[voxel as usize + 1]]
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        weighted_distance(&self.params.weights, self.config(a), self.config(b))
    }

    /// Chain-metric distance from `node` to an arbitrary flat chain configuration.
    pub fn distance_to(&self, node: NodeId, values: &[f64]) -> f64 {
        weighted_distance(&self.params.weights, self.config(node), values)
    }

    /// Distance between torso parts only, using the torso weights.
    pub fn torso_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_distance(&self.params.weights[..self.torso_grid.dof()], a, b)
    }

    /// Checks every structural invariant and re-evaluates node admissibility
    /// against `model`.
    pub fn verify(&self, model: &RobotModel) -> Result<()> {
        let bad = |msg: String| Err(Error::Input(format!("{} roadmap: {msg}", self.chain.name())));
        let n = self.node_count() as NodeId;
        for node in 0..n {
            let t = self.torso_of(node) as usize;
            let expect = self.torso_grid.values_of(t);
            if self
                .torso_values(node)
                .iter()
                .zip(&expect)
                .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                return bad(format!("node {node} torso values differ from torso cell {t}"));
            }
            let nb = self.neighbors(node);
            if nb.windows(2).any(|w| w[0] >= w[1]) || nb.contains(&node) {
                return bad(format!("node {node} neighbor list not sorted or has a self-loop"));
            }
            if nb.iter().any(|&m| self.neighbors(m).binary_search(&node).is_err()) {
                return bad(format!("adjacency of node {node} is not symmetric"));
            }
            if model.chain_self_collision(self.chain, &self.chain_config(node))? {
                return bad(format!("node {node} is in self-collision"));
            }
        }
        for v in 0..self.grid.voxel_count() as VoxelId {
            if self.colliding_nodes(v).windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("collision list of voxel {v} not sorted"));
            }
        }
        Ok(())
    }
}

/// Offset patterns: every combination of 1..=k joints each moved by +-1 step.
fn neighbor_patterns(dof: usize, k: usize) -> Vec<Vec<(usize, isize)>> {
    fn rec(
        start: usize,
        dof: usize,
        left: usize,
        cur: &mut Vec<(usize, isize)>,
        out: &mut Vec<Vec<(usize, isize)>>,
    ) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for j in start..dof {
            for d in [-1, 1] {
                cur.push((j, d));
                rec(j + 1, dof, left - 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(0, dof, k, &mut Vec::new(), &mut out);
    out
}

/// Builds one chain's roadmap from the Cartesian product of the torso grid
/// and the arm grid, discarding nodes in self-collision or rejected by `hook`.
pub fn build_roadmap(
    model: &RobotModel,
    chain: ChainId,
    torso_grid: Arc<JointGrid>,
    arm_grid: JointGrid,
    grid: &VoxelGrid,
    params: RoadmapParams,
    hook: Option<ConstraintHook<'_>>,
) -> Result<Roadmap> {
    grid.validate()?;
    let t_dof = torso_grid.dof();
    let a_dof = arm_grid.dof();
    if t_dof != model.torso_dof() || a_dof != model.arm_dof(chain) {
        return Err(Error::Input(format!(
            "grid has {t_dof}+{a_dof} joints, model chain {} has {}+{}",
            chain.number(),
            model.torso_dof(),
            model.arm_dof(chain)
        )));
    }
    if params.weights.len() != t_dof + a_dof {
        return Err(Error::Input(format!(
            "{} metric weights for a {}-joint chain",
            params.weights.len(),
            t_dof + a_dof
        )));
    }
    if !(params.padding >= 0.0) || params.max_moving_joints == 0 {
        return Err(Error::Input(
            "padding must be >= 0 and max_moving_joints >= 1".into(),
        ));
    }
    let torso_cells = torso_grid.cell_count();
    let arm_cells = arm_grid.cell_count();
    let candidates = torso_cells.checked_mul(arm_cells).unwrap_or(usize::MAX);
    if candidates > params.node_cap {
        return Err(Error::NodeCapExceeded {
            candidates,
            cap: params.node_cap,
        });
    }
    // Grid values are monotone per joint, so the extreme cells bound all others.
    for cell in [0, torso_cells - 1] {
        model.check_values(model.torso_joints().iter(), &torso_grid.values_of(cell), "torso")?;
    }
    for cell in [0, arm_cells - 1] {
        model.check_values(model.arm_joints(chain).iter(), &arm_grid.values_of(cell), chain.name())?;
    }

    let candidate_values = |c: usize| -> (Vec<f64>, Vec<f64>) {
        (torso_grid.values_of(c / arm_cells), arm_grid.values_of(c % arm_cells))
    };

    // Survivors with their voxel hits, in candidate order.
    let survivors: Vec<Option<Vec<VoxelId>>> = (0..candidates)
        .into_par_iter()
        .map(|c| {
            let (torso, arm) = candidate_values(c);
            let placed = model.place_chain_unchecked(chain, &torso, &arm);
            if model.self_collision_in(chain, &placed) {
                return None;
            }
            if let Some(hook) = hook {
                if !hook(chain, &ChainConfig::new(torso, arm)) {
                    return None;
                }
            }
            Some(model.voxel_hits_in(chain, &placed, grid, params.padding))
        })
        .collect();

    let mut node_of = vec![NodeId::MAX; candidates];
    let mut next: NodeId = 0;
    let mut torso_offsets = Vec::with_capacity(torso_cells + 1);
    let mut torso_of = Vec::new();
    for t in 0..torso_cells {
        torso_offsets.push(next);
        for a in 0..arm_cells {
            let c = t * arm_cells + a;
            if survivors[c].is_some() {
                node_of[c] = next;
                torso_of.push(t as u32);
                next += 1;
            }
        }
    }
    torso_offsets.push(next);
    let n = next as usize;
    if n == 0 {
        return Err(Error::EmptyRoadmap(chain.name()));
    }

    let mut configs = Vec::with_capacity(n * (t_dof + a_dof));
    let mut cand_of = Vec::with_capacity(n);
    for (c, s) in survivors.iter().enumerate() {
        if s.is_some() {
            let (torso, arm) = candidate_values(c);
            configs.extend(torso);
            configs.extend(arm);
            cand_of.push(c);
        }
    }

    // Adjacency.
    let mut radix = torso_grid.counts();
    radix.extend(arm_grid.counts());
    let patterns = neighbor_patterns(t_dof + a_dof, params.max_moving_joints);
    let encode = |digits: &[usize]| digits.iter().zip(&radix).fold(0usize, |acc, (d, r)| acc * r + d);
    let lists: Vec<Vec<NodeId>> = cand_of
        .par_iter()
        .map(|&c| {
            let mut digits = vec![0usize; radix.len()];
            let mut rest = c;
            for j in (0..radix.len()).rev() {
                digits[j] = rest % radix[j];
                rest /= radix[j];
            }
            let mut out = Vec::new();
            'pattern: for pat in &patterns {
                let mut moved = digits.clone();
                for &(j, d) in pat {
                    let v = moved[j] as isize + d;
                    if v < 0 || v >= radix[j] as isize {
                        continue 'pattern;
                    }
                    moved[j] = v as usize;
                }
                let id = node_of[encode(&moved)];
                if id != NodeId::MAX {
                    out.push(id);
                }
            }
            out.sort_unstable();
            out
        })
        .collect();
    let mut adj_offsets = Vec::with_capacity(n + 1);
    let mut adj = Vec::with_capacity(lists.iter().map(Vec::len).sum());
    adj_offsets.push(0);
    for l in &lists {
        adj.extend_from_slice(l);
        adj_offsets.push(adj.len());
    }
    drop(lists);

    // Voxel -> node transpose; nodes are visited in id order so lists come out sorted.
    let voxels = grid.voxel_count();
    let mut counts = vec![0usize; voxels + 1];
    for hits in survivors.iter().flatten() {
        for &v in hits {
            counts[v as usize + 1] += 1;
        }
    }
    for i in 0..voxels {
        counts[i + 1] += counts[i];
    }
    let coll_offsets = counts;
    let mut cursor = coll_offsets.clone();
    let mut coll_nodes = vec![0 as NodeId; coll_offsets[voxels]];
    let mut id: NodeId = 0;
    for hits in survivors.iter().flatten() {
        for &v in hits {
            coll_nodes[cursor[v as usize]] = id;
            cursor[v as usize] += 1;
        }
        id += 1;
    }

    Ok(Roadmap {
        chain,
        torso_grid,
        arm_grid,
        params,
        grid: *grid,
        configs,
        torso_offsets,
        torso_of,
        adj_offsets,
        adj,
        coll_offsets,
        coll_nodes,
    })
}

/// Per-query node validity overlay; the roadmap itself is never modified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    invalid: FixedBitSet,
    epoch: u64,
}

impl ValidityMask {
    pub fn all_valid(nodes: usize) -> Self {
        Self {
            invalid: FixedBitSet::with_capacity(nodes),
            epoch: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.invalid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.invalid.len() == 0
    }

    pub fn is_valid(&self, node: NodeId) -> bool {
        !self.invalid.contains(node as usize)
    }

    /// Marks `node` invalid; returns whether it was valid before.
    pub fn invalidate(&mut self, node: NodeId) -> bool {
        let was_valid = !self.invalid.put(node as usize);
        if was_valid {
            self.epoch += 1;
        }
        was_valid
    }

    pub fn invalid_count(&self) -> usize {
        self.invalid.count_ones(..)
    }

    pub fn invalid_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.invalid.ones().map(|i| i as NodeId)
    }

    /// Number of modifications since creation.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

/// Invalidates every node listed under an active voxel. Cost is the sum of
/// the collision-list lengths of the active voxels.
pub fn build_collision_set(roadmap: &Roadmap, occupancy: &OccupancySet) -> Result<ValidityMask> {
    if occupancy.grid() != &roadmap.grid {
        return Err(Error::Incompatible(format!(
            "occupancy grid {:?} does not match roadmap grid {:?}",
            occupancy.grid(),
            roadmap.grid
        )));
    }
    let mut mask = ValidityMask::all_valid(roadmap.node_count());
    for v in occupancy.ids() {
        for &node in roadmap.colliding_nodes(v) {
            mask.invalid.insert(node as usize);
        }
    }
    mask.epoch = 0;
    Ok(mask)
}

/// Valid nodes ordered by chain-metric distance to `target` (ties by id),
/// optionally restricted to one torso cell. At most `k` are returned.
pub fn nearest_valid_nodes(
    roadmap: &Roadmap,
    mask: &ValidityMask,
    target: &[f64],
    torso: Option<u32>,
    k: usize,
) -> Vec<(NodeId, f64)> {
    let range = match torso {
        Some(t) => roadmap.nodes_at_torso(t),
        None => 0..roadmap.node_count() as NodeId,
    };
    let mut best: Vec<(NodeId, f64)> = Vec::with_capacity(k + 1);
    for node in range {
        if !mask.is_valid(node) {
            continue;
        }
        let d = roadmap.distance_to(node, target);
        if best.len() == k && d >= best[k - 1].1 {
            continue;
        }
        let pos = best.partition_point(|&(_, e)| e <= d);
        best.insert(pos, (node, d));
        best.truncate(k);
    }
    best
}

/// The valid node nearest to `target`, ties broken by lowest id.
pub fn nearest_valid_node(
    roadmap: &Roadmap,
    mask: &ValidityMask,
    target: &ChainConfig,
    torso: Option<u32>,
) -> Result<NodeId> {
    let flat: Vec<f64> = target.values().collect();
    if flat.len() != roadmap.dof() {
        return Err(Error::Input(format!(
            "target has {} joint values, roadmap has {}",
            flat.len(),
            roadmap.dof()
        )));
    }
    nearest_valid_nodes(roadmap, mask, &flat, torso, 1)
        .first()
        .map(|&(n, _)| n)
        .ok_or_else(|| {
            Error::NoConnectableNode(match torso {
                Some(t) => format!("no valid {} node at torso cell {t}", roadmap.chain.name()),
                None => format!("no valid {} node", roadmap.chain.name()),
            })
        })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::demo;

    const STEP: f64 = PI / 6.0;

    #[test]
    fn uniform_grid_counts() {
        let g = JointGrid::uniform(&[[-STEP, STEP], [0.0, PI / 2.0]], &[STEP, STEP]).unwrap();
        assert_eq!(g.counts(), vec![3, 4]);
        assert_eq!(g.cell_count(), 12);
        assert_eq!(g.joint_values(1)[3], PI / 2.0);
        let single = JointGrid::uniform(&[[0.3, 0.3]], &[STEP]).unwrap();
        assert_eq!(single.joint_values(0), &[0.3]);
        assert!(JointGrid::uniform(&[[0.0, 1.0]], &[0.0]).is_err());
        assert!(JointGrid::uniform(&[[0.0, 1.0]], &[-0.1]).is_err());
    }

    #[test]
    fn digits_round_trip() {
        let g = JointGrid::uniform(&[[0.0, 2.0], [0.0, 1.0], [0.0, 3.0]], &[1.0, 1.0, 1.0]).unwrap();
        let mut d = vec![0; 3];
        for c in 0..g.cell_count() {
            g.digits(c, &mut d);
            assert_eq!(g.cell(&d), c);
            assert_eq!(g.find(&g.values_of(c)), Some(c));
        }
        // Last joint fastest.
        assert_eq!(g.values_of(1), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn pattern_counts() {
        // 2 * 5 single moves + 4 * C(5, 2) double moves.
        assert_eq!(neighbor_patterns(5, 2).len(), 10 + 40);
        assert_eq!(neighbor_patterns(3, 1).len(), 6);
        assert_eq!(neighbor_patterns(2, 3).len(), 4 + 4);
    }

    fn tiny() -> RobotModel {
        demo::tiny_description().into_model().unwrap()
    }

    fn small_grid() -> VoxelGrid {
        VoxelGrid::new([-0.6, -0.6, 0.0], 0.1, [12, 12, 10]).unwrap()
    }

    fn params(grid: &VoxelGrid) -> RoadmapParams {
        RoadmapParams::for_grid(grid, 2)
    }

    #[test]
    fn smallest_product() {
        let m = tiny();
        let torso = Arc::new(JointGrid::from_values(vec![vec![0.0]]).unwrap());
        let arm = JointGrid::from_values(vec![vec![0.0, STEP]]).unwrap();
        let grid = small_grid();
        let r = build_roadmap(&m, ChainId::Arm1, torso, arm, &grid, params(&grid), None).unwrap();
        assert_eq!(r.node_count(), 2);
        assert_eq!(r.edge_count(), 1);
        assert_eq!(r.torso_cell_count(), 1);
        assert_eq!(r.neighbors(0), &[1]);
        assert_eq!(r.neighbors(1), &[0]);
    }

    #[test]
    fn node_cap_enforced() {
        let m = tiny();
        let torso = Arc::new(JointGrid::uniform(&[[-STEP, STEP]], &[STEP]).unwrap());
        let arm = JointGrid::uniform(&[[-2.0 * STEP, 2.0 * STEP]], &[STEP]).unwrap();
        let grid = small_grid();
        let mut p = params(&grid);
        p.node_cap = 14;
        let err = build_roadmap(&m, ChainId::Arm1, torso, arm, &grid, p, None).unwrap_err();
        assert!(matches!(err, Error::NodeCapExceeded { candidates: 15, cap: 14 }));
    }

    #[test]
    fn hook_can_empty_the_roadmap() {
        let m = tiny();
        let torso = Arc::new(JointGrid::uniform(&[[-STEP, STEP]], &[STEP]).unwrap());
        let arm = JointGrid::uniform(&[[-STEP, STEP]], &[STEP]).unwrap();
        let grid = small_grid();
        let reject = |_: ChainId, _: &ChainConfig| false;
        let err = build_roadmap(&m, ChainId::Arm2, torso.clone(), arm.clone(), &grid, params(&grid), Some(&reject))
            .unwrap_err();
        assert!(matches!(err, Error::EmptyRoadmap("arm2")));
        let keep_positive = |_: ChainId, c: &ChainConfig| c.arm[0] >= 0.0;
        let r = build_roadmap(&m, ChainId::Arm2, torso, arm, &grid, params(&grid), Some(&keep_positive)).unwrap();
        assert_eq!(r.node_count(), 6);
    }

    #[test]
    fn neighbors_by_torso_matches_filter() {
        let m = demo::mini_description().into_model().unwrap();
        let grid = VoxelGrid::new([-0.8, -0.8, 0.0], 0.1, [16, 16, 12]).unwrap();
        let torso = Arc::new(JointGrid::uniform(&[[-STEP, STEP], [0.0, 2.0 * STEP]], &[STEP; 2]).unwrap());
        let arm = JointGrid::uniform(&[[-PI / 2.0, PI / 2.0]; 2], &[STEP; 2]).unwrap();
        let r = build_roadmap(&m, ChainId::Arm1, torso, arm, &grid, RoadmapParams::for_grid(&grid, 4), None).unwrap();
        r.verify(&m).unwrap();
        for node in 0..r.node_count() as NodeId {
            for t in 0..r.torso_cell_count() as u32 {
                let expect: Vec<NodeId> = r
                    .neighbors(node)
                    .iter()
                    .copied()
                    .filter(|&n| r.torso_of(n) == t)
                    .collect();
                assert_eq!(r.neighbors_by_torso(node, t), expect.as_slice());
            }
            assert!(!r.neighbors_by_torso(node, r.torso_of(node)).contains(&node));
        }
    }

    #[test]
    fn collision_set_saturates_and_empties() {
        let m = tiny();
        let grid = small_grid();
        let torso = Arc::new(JointGrid::uniform(&[[-STEP, STEP]], &[STEP]).unwrap());
        let arm = JointGrid::uniform(&[[-2.0 * STEP, 2.0 * STEP]], &[STEP]).unwrap();
        let r = build_roadmap(&m, ChainId::Arm1, torso, arm, &grid, params(&grid), None).unwrap();
        let empty = build_collision_set(&r, &OccupancySet::empty(&grid)).unwrap();
        assert_eq!(empty.invalid_count(), 0);
        let full = build_collision_set(&r, &OccupancySet::full(&grid)).unwrap();
        let mut union: Vec<NodeId> = (0..grid.voxel_count() as VoxelId)
            .flat_map(|v| r.colliding_nodes(v).to_vec())
            .collect();
        union.sort_unstable();
        union.dedup();
        assert_eq!(full.invalid_nodes().collect::<Vec<_>>(), union);

        let other = VoxelGrid::new([-0.6, -0.6, 0.0], 0.2, [6, 6, 5]).unwrap();
        assert!(matches!(
            build_collision_set(&r, &OccupancySet::empty(&other)),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn nearest_node_respects_mask_and_torso() {
        let m = tiny();
        let grid = small_grid();
        let torso = Arc::new(JointGrid::uniform(&[[-STEP, STEP]], &[STEP]).unwrap());
        let arm = JointGrid::uniform(&[[-2.0 * STEP, 2.0 * STEP]], &[STEP]).unwrap();
        let r = build_roadmap(&m, ChainId::Arm1, torso, arm, &grid, params(&grid), None).unwrap();
        let mut mask = ValidityMask::all_valid(r.node_count());
        let on_node = r.chain_config(7);
        assert_eq!(nearest_valid_node(&r, &mask, &on_node, None).unwrap(), 7);

        // Between nodes 7 and 8 (same torso, arm 0 and pi/6), nearer to 7.
        let between = ChainConfig::new(r.torso_values(7).to_vec(), vec![0.2 * STEP]);
        assert_eq!(nearest_valid_node(&r, &mask, &between, None).unwrap(), 7);
        mask.invalidate(7);
        assert_eq!(nearest_valid_node(&r, &mask, &between, None).unwrap(), 8);

        let cell0 = nearest_valid_node(&r, &mask, &between, Some(0)).unwrap();
        assert_eq!(r.torso_of(cell0), 0);
        for t in 0..3 {
            let brute = r
                .nodes_at_torso(t)
                .filter(|&n| mask.is_valid(n))
                .min_by(|&a, &b| {
                    let fa: Vec<f64> = between.values().collect();
                    r.distance_to(a, &fa).total_cmp(&r.distance_to(b, &fa)).then(a.cmp(&b))
                })
                .unwrap();
            assert_eq!(nearest_valid_node(&r, &mask, &between, Some(t)).unwrap(), brute);
        }

        for node in r.nodes_at_torso(2) {
            mask.invalidate(node);
        }
        assert!(matches!(
            nearest_valid_node(&r, &mask, &between, Some(2)),
            Err(Error::NoConnectableNode(_))
        ));
    }

    #[test]
    fn mask_epoch_counts_changes() {
        let mut mask = ValidityMask::all_valid(4);
        assert!(mask.invalidate(2));
        assert!(!mask.invalidate(2));
        assert_eq!(mask.epoch(), 1);
        assert_eq!(mask.invalid_count(), 1);
        assert!(!mask.is_valid(2) && mask.is_valid(3));
    }
}
