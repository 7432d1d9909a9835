//! Two chain roadmaps over one shared torso grid, plus the inter-arm maps.
//!
//! A node pair `(a, b)` is usable only when both nodes sit in the same torso
//! cell. The inter-arm maps list, for every node of one roadmap, the
//! same-torso nodes of the other roadmap whose arm spheres overlap it.
//! Together with the two validity masks this answers pair collision queries
//! without forward kinematics.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Point3;
use rayon::prelude::*;

use crate::config::{ChainConfig, ChainId, FullConfig, MetricWeights};
use crate::error::{Error, Result};
use crate::format::{self, compatibility_hash, CompatMeta, FileKind, FormatError, Writer};
use crate::kinematics::{ConstraintHook, RobotModel};
use crate::roadmap::{build_collision_set, build_roadmap, JointGrid, NodeId, Roadmap, RoadmapParams, ValidityMask};
use crate::voxel::{OccupancySet, VoxelGrid};

/// Slack on the bounding-sphere prefilter so rounding never drops a true overlap.
const PREFILTER_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePair {
    pub arm1: NodeId,
    pub arm2: NodeId,
}

impl NodePair {
    pub fn new(arm1: NodeId, arm2: NodeId) -> Self {
        Self { arm1, arm2 }
    }

    pub fn get(self, chain: ChainId) -> NodeId {
        match chain {
            ChainId::Arm1 => self.arm1,
            ChainId::Arm2 => self.arm2,
        }
    }
}

/// Build parameters shared by both chains.
#[derive(Debug, Clone, PartialEq)]
pub struct DualParams {
    pub padding: f64,
    pub max_moving_joints: usize,
    pub weights: MetricWeights,
    /// Per-chain candidate node cap.
    pub node_cap: usize,
    /// Cap on the number of same-torso pairs examined for the inter-arm maps.
    pub pair_budget: u64,
}

impl DualParams {
    pub const DEFAULT_PAIR_BUDGET: u64 = 400_000_000;

    pub fn for_model(model: &RobotModel, grid: &VoxelGrid) -> Self {
        Self {
            padding: 0.5 * grid.voxel_size,
            max_moving_joints: 2,
            weights: MetricWeights::uniform(
                model.torso_dof(),
                model.arm_dof(ChainId::Arm1),
                model.arm_dof(ChainId::Arm2),
            ),
            node_cap: RoadmapParams::DEFAULT_NODE_CAP,
            pair_budget: Self::DEFAULT_PAIR_BUDGET,
        }
    }

    fn chain_params(&self, chain: ChainId) -> RoadmapParams {
        RoadmapParams {
            padding: self.padding,
            max_moving_joints: self.max_moving_joints,
            weights: self.weights.chain(chain),
            node_cap: self.node_cap,
        }
    }
}

/// Uniform grids for the torso and both arms. Ranges default to the joint
/// limits; `overrides` maps joint names to narrower ranges.
pub fn uniform_grids(
    model: &RobotModel,
    torso_step: f64,
    arm_step: f64,
    overrides: &BTreeMap<String, [f64; 2]>,
) -> Result<(JointGrid, [JointGrid; 2])> {
    let mut unused: Vec<&String> = overrides.keys().collect();
    let mut grid_for = |joints: &[crate::kinematics::Joint], step: f64| {
        let ranges: Vec<[f64; 2]> = joints
            .iter()
            .map(|j| {
                unused.retain(|n| **n != j.name);
                overrides.get(&j.name).copied().unwrap_or(j.limits)
            })
            .collect();
        JointGrid::uniform(&ranges, &vec![step; ranges.len()])
    };
    let torso = grid_for(model.torso_joints(), torso_step)?;
    let arm1 = grid_for(model.arm_joints(ChainId::Arm1), arm_step)?;
    let arm2 = grid_for(model.arm_joints(ChainId::Arm2), arm_step)?;
    if let Some(name) = unused.first() {
        return Err(Error::Input(format!("joint range given for unknown joint {name:?}")));
    }
    Ok((torso, [arm1, arm2]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualRoadmap {
    pub(crate) torso_grid: Arc<JointGrid>,
    pub(crate) roadmaps: [Roadmap; 2],
    /// Row per arm1 node: colliding same-torso arm2 nodes, sorted.
    pub(crate) inter1_offsets: Vec<usize>,
    pub(crate) inter1: Vec<NodeId>,
    /// Row per arm2 node: colliding same-torso arm1 nodes, sorted.
    pub(crate) inter2_offsets: Vec<usize>,
    pub(crate) inter2: Vec<NodeId>,
    pub(crate) weights: MetricWeights,
    pub(crate) pair_budget: u64,
}

/// Arm sphere centers per node plus a padded bounding sphere.
struct ArmCloud {
    centers: Vec<Point3<f64>>,
    per_node: usize,
    bound_center: Vec<Point3<f64>>,
    bound_radius: Vec<f64>,
}

impl ArmCloud {
    fn new(model: &RobotModel, r: &Roadmap, padding: f64) -> Self {
        let chain = r.chain();
        let radii: Vec<f64> = model.arm_radii(chain).collect();
        let per_node = radii.len();
        let placed: Vec<Vec<Point3<f64>>> = (0..r.node_count() as NodeId)
            .into_par_iter()
            .map(|n| {
                model
                    .place_chain_unchecked(chain, r.torso_values(n), r.arm_values(n))
                    .arm(chain)
                    .to_vec()
            })
            .collect();
        let mut centers = Vec::with_capacity(per_node * placed.len());
        let mut bound_center = Vec::with_capacity(placed.len());
        let mut bound_radius = Vec::with_capacity(placed.len());
        for pts in placed {
            let c = if pts.is_empty() {
                Point3::origin()
            } else {
                Point3::from(pts.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords) / pts.len() as f64)
            };
            let rad = pts
                .iter()
                .zip(&radii)
                .map(|(p, r)| (p - c).norm() + r)
                .fold(0.0, f64::max);
            bound_center.push(c);
            bound_radius.push(rad + padding);
            centers.extend(pts);
        }
        Self {
            centers,
            per_node,
            bound_center,
            bound_radius,
        }
    }

    fn node(&self, n: NodeId) -> &[Point3<f64>] {
        &self.centers[n as usize * self.per_node..(n as usize + 1) * self.per_node]
    }
}

fn transpose(offsets: &[usize], ids: &[NodeId], cols: usize) -> (Vec<usize>, Vec<NodeId>) {
    let mut t_off = vec![0usize; cols + 1];
    for &b in ids {
        t_off[b as usize + 1] += 1;
    }
    for i in 0..cols {
        t_off[i + 1] += t_off[i];
    }
    let mut cursor = t_off.clone();
    let mut t_ids = vec![0; ids.len()];
    for a in 0..offsets.len() - 1 {
        for &b in &ids[offsets[a]..offsets[a + 1]] {
            t_ids[cursor[b as usize]] = a as NodeId;
            cursor[b as usize] += 1;
        }
    }
    (t_off, t_ids)
}

/// Builds both chain roadmaps and the inter-arm maps.
pub fn build_dual(
    model: &RobotModel,
    torso_grid: JointGrid,
    arm_grids: [JointGrid; 2],
    grid: &VoxelGrid,
    params: &DualParams,
    hook: Option<ConstraintHook<'_>>,
) -> Result<DualRoadmap> {
    let torso_grid = Arc::new(torso_grid);
    let [g1, g2] = arm_grids;
    let r1 = build_roadmap(model, ChainId::Arm1, Arc::clone(&torso_grid), g1, grid, params.chain_params(ChainId::Arm1), hook)?;
    let r2 = build_roadmap(model, ChainId::Arm2, Arc::clone(&torso_grid), g2, grid, params.chain_params(ChainId::Arm2), hook)?;

    let pairs: u64 = (0..torso_grid.cell_count() as u32)
        .map(|t| r1.nodes_at_torso(t).len() as u64 * r2.nodes_at_torso(t).len() as u64)
        .sum();
    if pairs > params.pair_budget {
        return Err(Error::PairBudgetExceeded {
            pairs,
            budget: params.pair_budget,
        });
    }

    let c1 = ArmCloud::new(model, &r1, params.padding);
    let c2 = ArmCloud::new(model, &r2, params.padding);
    let pad = params.padding;

    let rows: Vec<Vec<NodeId>> = (0..r1.node_count() as NodeId)
        .into_par_iter()
        .map(|a| {
            let (ca, ra) = (c1.bound_center[a as usize], c1.bound_radius[a as usize]);
            let pa = c1.node(a);
            r2.nodes_at_torso(r1.torso_of(a))
                .filter(|&b| {
                    let reach = ra + c2.bound_radius[b as usize] + PREFILTER_EPS;
                    if (c2.bound_center[b as usize] - ca).norm_squared() >= reach * reach {
                        return false;
                    }
                    model.inter_arm_in(pa, c2.node(b), pad)
                })
                .collect()
        })
        .collect();
    let mut inter1_offsets = Vec::with_capacity(rows.len() + 1);
    let mut inter1 = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    inter1_offsets.push(0);
    for row in &rows {
        inter1.extend_from_slice(row);
        inter1_offsets.push(inter1.len());
    }
    let (inter2_offsets, inter2) = transpose(&inter1_offsets, &inter1, r2.node_count());

    Ok(DualRoadmap {
        torso_grid,
        roadmaps: [r1, r2],
        inter1_offsets,
        inter1,
        inter2_offsets,
        inter2,
        weights: params.weights.clone(),
        pair_budget: params.pair_budget,
    })
}

impl DualRoadmap {
    pub fn roadmap(&self, chain: ChainId) -> &Roadmap {
        &self.roadmaps[chain.index()]
    }

    pub fn torso_grid(&self) -> &Arc<JointGrid> {
        &self.torso_grid
    }

    pub fn voxel_grid(&self) -> &VoxelGrid {
        self.roadmaps[0].voxel_grid()
    }

    pub fn padding(&self) -> f64 {
        self.roadmaps[0].params().padding
    }

    pub fn weights(&self) -> &MetricWeights {
        &self.weights
    }

    pub fn pair_budget(&self) -> u64 {
        self.pair_budget
    }

    pub fn compat_meta(&self) -> CompatMeta {
        CompatMeta {
            grid: *self.voxel_grid(),
            padding: Some(self.padding()),
            weights: Some(self.flat_weights()),
        }
    }

    pub(crate) fn flat_weights(&self) -> Vec<f64> {
        let w = &self.weights;
        w.torso.iter().chain(&w.arm1).chain(&w.arm2).copied().collect()
    }

    /// Arm2 nodes in the same torso cell as arm1 node `a` that collide with it.
    pub fn inter_colliding_with_arm1(&self, a: NodeId) -> &[NodeId] {
        &self.inter1[self.inter1_offsets[a as usize]..self.inter1_offsets[a as usize + 1]]
    }

    /// Arm1 nodes in the same torso cell as arm2 node `b` that collide with it.
    pub fn inter_colliding_with_arm2(&self, b: NodeId) -> &[NodeId] {
        &self.inter2[self.inter2_offsets[b as usize]..self.inter2_offsets[b as usize + 1]]
    }

    /// Number of colliding same-torso pairs.
    pub fn inter_pair_count(&self) -> usize {
        self.inter1.len()
    }

    pub fn same_torso(&self, pair: NodePair) -> bool {
        self.roadmaps[0].torso_of(pair.arm1) == self.roadmaps[1].torso_of(pair.arm2)
    }

    fn require_same_torso(&self, pair: NodePair) -> Result<u32> {
        let ta = self.roadmaps[0].torso_of(pair.arm1);
        let tb = self.roadmaps[1].torso_of(pair.arm2);
        if ta != tb {
            return Err(Error::TorsoMismatch {
                a: pair.arm1,
                b: pair.arm2,
                ta,
                tb,
            });
        }
        Ok(ta)
    }

    pub(crate) fn inter_contains(&self, pair: NodePair) -> bool {
        self.inter_colliding_with_arm1(pair.arm1).binary_search(&pair.arm2).is_ok()
    }

    /// Pair collision from the maps alone: inter-arm entry or either node
    /// masked. Errors if the nodes are in different torso cells.
    pub fn pair_in_collision(&self, pair: NodePair, mask1: &ValidityMask, mask2: &ValidityMask) -> Result<bool> {
        self.require_same_torso(pair)?;
        Ok(self.inter_contains(pair) || !mask1.is_valid(pair.arm1) || !mask2.is_valid(pair.arm2))
    }

    /// Full configuration of a same-torso pair.
    pub fn compose(&self, pair: NodePair) -> Result<FullConfig> {
        self.require_same_torso(pair)?;
        let (r1, r2) = (&self.roadmaps[0], &self.roadmaps[1]);
        Ok(FullConfig::new(
            r1.torso_values(pair.arm1).to_vec(),
            r1.arm_values(pair.arm1).to_vec(),
            r2.arm_values(pair.arm2).to_vec(),
        ))
    }

    /// Splits a full configuration into its two chain configurations.
    pub fn project(config: &FullConfig) -> (ChainConfig, ChainConfig) {
        (config.chain(ChainId::Arm1), config.chain(ChainId::Arm2))
    }

    pub fn collision_masks(&self, occupancy: &OccupancySet) -> Result<[ValidityMask; 2]> {
        Ok([
            build_collision_set(&self.roadmaps[0], occupancy)?,
            build_collision_set(&self.roadmaps[1], occupancy)?,
        ])
    }

    /// Structural checks plus re-evaluation of node admissibility and of
    /// every same-torso pair against `model`. Quadratic in nodes per torso cell.
    pub fn verify(&self, model: &RobotModel) -> Result<()> {
        for r in &self.roadmaps {
            r.verify(model)?;
        }
        let (r1, r2) = (&self.roadmaps[0], &self.roadmaps[1]);
        let pad = self.padding();
        for a in 0..r1.node_count() as NodeId {
            for b in r2.nodes_at_torso(r1.torso_of(a)) {
                let full = self.compose(NodePair::new(a, b))?;
                let expect = model.inter_arm_collision(&full, pad)?;
                if expect != self.inter_contains(NodePair::new(a, b)) {
                    return Err(Error::Input(format!("inter-arm map wrong for pair ({a}, {b})")));
                }
            }
        }
        let (o, ids) = transpose(&self.inter1_offsets, &self.inter1, r2.node_count());
        if o != self.inter2_offsets || ids != self.inter2 {
            return Err(Error::Input("inter-arm maps are not transposes of each other".into()));
        }
        Ok(())
    }

    pub fn compat_hash(&self) -> u64 {
        compatibility_hash(self.voxel_grid(), self.padding(), &self.flat_weights())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.joint_grid(&self.torso_grid);
        format::write_roadmap_block(&mut w, &self.roadmaps[0]);
        format::write_roadmap_block(&mut w, &self.roadmaps[1]);
        w.csr(&self.inter1_offsets, &self.inter1);
        w.csr(&self.inter2_offsets, &self.inter2);
        w.u64(self.pair_budget);
        w.finish(FileKind::Dual, self.compat_hash())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (compat, mut rd) = format::open(bytes, FileKind::Dual)?;
        let corrupt = |m: &str| Error::Format(FormatError::Corrupt(m.into()));
        let torso_grid = Arc::new(rd.joint_grid()?);
        let r1 = format::read_roadmap_block(&mut rd, &torso_grid)?;
        let r2 = format::read_roadmap_block(&mut rd, &torso_grid)?;
        if r1.chain() != ChainId::Arm1 || r2.chain() != ChainId::Arm2 {
            return Err(corrupt("roadmap blocks out of order"));
        }
        if r1.voxel_grid() != r2.voxel_grid()
            || r1.params().padding.to_bits() != r2.params().padding.to_bits()
            || r1.params().max_moving_joints != r2.params().max_moving_joints
        {
            return Err(corrupt("roadmap blocks disagree on grid or build parameters"));
        }
        let t_dof = torso_grid.dof();
        if r1.params().weights[..t_dof] != r2.params().weights[..t_dof] {
            return Err(corrupt("roadmap blocks disagree on torso weights"));
        }
        let (inter1_offsets, inter1) = rd.csr(r1.node_count(), r2.node_count())?;
        let (inter2_offsets, inter2) = rd.csr(r2.node_count(), r1.node_count())?;
        let pair_budget = rd.u64()?;
        rd.done()?;
        for a in 0..r1.node_count() {
            let row = &inter1[inter1_offsets[a]..inter1_offsets[a + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&b| r2.torso_of(b) != r1.torso_of(a as NodeId)) {
                return Err(corrupt("inter-arm row not sorted or crosses torso cells"));
            }
        }
        let (o, ids) = transpose(&inter1_offsets, &inter1, r2.node_count());
        if o != inter2_offsets || ids != inter2 {
            return Err(corrupt("inter-arm maps are not transposes of each other"));
        }
        let w1 = &r1.params().weights;
        let weights = MetricWeights {
            torso: w1[..t_dof].to_vec(),
            arm1: w1[t_dof..].to_vec(),
            arm2: r2.params().weights[t_dof..].to_vec(),
        };
        let dual = DualRoadmap {
            torso_grid,
            roadmaps: [r1, r2],
            inter1_offsets,
            inter1,
            inter2_offsets,
            inter2,
            weights,
            pair_budget,
        };
        if dual.compat_hash() != compat {
            return Err(corrupt("stored compatibility hash does not match contents"));
        }
        Ok(dual)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;

    use super::*;
    use crate::demo;

    pub(crate) fn mini_dual(step: f64) -> (RobotModel, DualRoadmap) {
        let m = demo::mini_description().into_model().unwrap();
        let grid = VoxelGrid::new([-0.8, -0.8, 0.0], 0.1, [16, 16, 12]).unwrap();
        let (torso, arms) = uniform_grids(&m, step, step, &BTreeMap::new()).unwrap();
        let d = build_dual(&m, torso, arms, &grid, &DualParams::for_model(&m, &grid), None).unwrap();
        (m, d)
    }

    #[test]
    fn maps_agree_with_direct_checks() {
        let (m, d) = mini_dual(PI / 6.0);
        d.verify(&m).unwrap();
        assert!(d.inter_pair_count() > 0, "mini arms should be able to touch");
    }

    #[test]
    fn torso_mismatch_is_an_error() {
        let (_, d) = mini_dual(PI / 6.0);
        let r2 = d.roadmap(ChainId::Arm2);
        let a = 0;
        let t = d.roadmap(ChainId::Arm1).torso_of(a);
        let b = r2.nodes_at_torso(t + 1).start;
        let masks = [ValidityMask::all_valid(d.roadmap(ChainId::Arm1).node_count()), ValidityMask::all_valid(r2.node_count())];
        let err = d.pair_in_collision(NodePair::new(a, b), &masks[0], &masks[1]).unwrap_err();
        assert!(matches!(err, Error::TorsoMismatch { ta, tb, .. } if ta == t && tb == t + 1));
        assert!(d.compose(NodePair::new(a, b)).is_err());
    }

    #[test]
    fn dual_file_round_trip() {
        let (_, d) = mini_dual(PI / 4.0);
        let bytes = d.to_bytes();
        let back = DualRoadmap::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert!(Arc::ptr_eq(back.roadmap(ChainId::Arm1).torso_grid(), back.roadmap(ChainId::Arm2).torso_grid()));
        assert_eq!(back.to_bytes(), bytes);
        assert!(matches!(
            crate::format::roadmap_from_bytes(&bytes),
            Err(Error::Format(FormatError::WrongKind { found: 2, expected: 1 }))
        ));
    }

    #[test]
    fn build_is_deterministic() {
        let (_, a) = mini_dual(PI / 4.0);
        let (_, b) = mini_dual(PI / 4.0);
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn pair_budget_enforced() {
        let m = demo::mini_description().into_model().unwrap();
        let grid = VoxelGrid::new([-0.8, -0.8, 0.0], 0.1, [16, 16, 12]).unwrap();
        let (torso, arms) = uniform_grids(&m, PI / 4.0, PI / 4.0, &BTreeMap::new()).unwrap();
        let mut p = DualParams::for_model(&m, &grid);
        p.pair_budget = 10;
        assert!(matches!(
            build_dual(&m, torso, arms, &grid, &p, None),
            Err(Error::PairBudgetExceeded { budget: 10, .. })
        ));
    }

    #[test]
    fn joint_range_overrides() {
        let m = demo::mini_description().into_model().unwrap();
        let mut o = BTreeMap::new();
        o.insert("arm1_elbow".to_string(), [0.0, PI / 6.0]);
        let (_, arms) = uniform_grids(&m, PI / 6.0, PI / 6.0, &o).unwrap();
        assert_eq!(arms[0].counts(), vec![7, 2]);
        assert_eq!(arms[1].counts(), vec![7, 7]);
        o.insert("nope".to_string(), [0.0, 1.0]);
        assert!(uniform_grids(&m, PI / 6.0, PI / 6.0, &o).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The map-only pair query equals direct collision checking of the
        /// composed configuration, for random obstacle sets.
        #[test]
        fn pair_query_matches_direct_check(seed in any::<u64>(), density in 0.0f64..0.08) {
            use rand::{Rng, SeedableRng};
            let (m, d) = mini_dual_cached();
            let grid = *d.voxel_grid();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let occ = OccupancySet::from_ids(
                &grid,
                (0..grid.voxel_count() as u32).filter(|_| rng.gen_bool(density)),
            ).unwrap();
            let [m1, m2] = d.collision_masks(&occ).unwrap();
            let (r1, r2) = (d.roadmap(ChainId::Arm1), d.roadmap(ChainId::Arm2));
            for _ in 0..200 {
                let a = rng.gen_range(0..r1.node_count() as NodeId);
                let range = r2.nodes_at_torso(r1.torso_of(a));
                let b = rng.gen_range(range);
                let pair = NodePair::new(a, b);
                let direct = m.config_collision(&d.compose(pair).unwrap(), &occ, d.padding()).unwrap();
                prop_assert_eq!(d.pair_in_collision(pair, &m1, &m2).unwrap(), direct);
            }
        }
    }

    fn mini_dual_cached() -> &'static (RobotModel, DualRoadmap) {
        static CELL: std::sync::OnceLock<(RobotModel, DualRoadmap)> = std::sync::OnceLock::new();
        CELL.get_or_init(|| mini_dual(PI / 6.0))
    }
}
