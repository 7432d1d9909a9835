//! Planning scenarios (JSON) and the seeded shelf-world generator.

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ChainId, FullConfig, MetricWeights};
use crate::dual::DualRoadmap;
use crate::error::{Error, Result};
use crate::format::CompatMeta;
use crate::kinematics::RobotModel;
use crate::roadmap::{build_collision_set, nearest_valid_node, NodeId, ValidityMask};
use crate::voxel::{point, OccupancySet, VoxelGrid, VoxelId};

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "one")]
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    pub grid: VoxelGrid,
    /// Active voxel ids.
    #[serde(default)]
    pub occupied: Vec<VoxelId>,
    /// Obstacle points; each activates the voxel containing it.
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
    pub start: FullConfig,
    pub target: FullConfig,
    /// When present, must equal the roadmap's padding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<MetricWeights>,
}

impl Scenario {
    pub const VERSION: u32 = 1;

    pub fn occupancy(&self) -> Result<OccupancySet> {
        let mut occ = OccupancySet::from_ids(&self.grid, self.occupied.iter().copied())?;
        for p in &self.points {
            if let Some(id) = self.grid.voxel_of(&point(*p)) {
                occ.insert(id)?;
            }
        }
        Ok(occ)
    }

    pub fn compat_meta(&self) -> CompatMeta {
        CompatMeta {
            grid: self.grid,
            padding: self.padding,
            weights: self
                .weights
                .as_ref()
                .map(|w| w.torso.iter().chain(&w.arm1).chain(&w.arm2).copied().collect()),
        }
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::json(origin, e))?;
        if s.format_version != Self::VERSION {
            return Err(Error::FileFormat(format!(
                "{}: scenario format version {} (expected {})",
                origin.display(),
                s.format_version,
                Self::VERSION
            )));
        }
        s.grid.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Axis-aligned box in meters, robot base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Shelf-world generation parameters. A wall one voxel thick stands at a
/// random distance in front of the robot (normal along +x), with a few
/// rectangular openings cut out, and optionally a horizontal shelf board
/// attached to its front face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShelfParams {
    pub wall_x: [f64; 2],
    pub wall_y: [f64; 2],
    pub wall_z: [f64; 2],
    pub openings: [u32; 2],
    pub opening_width: [f64; 2],
    pub opening_height: [f64; 2],
    pub opening_center_y: [f64; 2],
    pub opening_center_z: [f64; 2],
    pub board_probability: f64,
    pub board_depth: f64,
    pub board_z: [f64; 2],
    /// Required clearance of the start and target, in voxels of sphere inflation.
    pub clearance_voxels: f64,
    pub attempts: u32,
}

impl Default for ShelfParams {
    fn default() -> Self {
        Self {
            wall_x: [0.45, 0.65],
            wall_y: [-0.9, 0.9],
            wall_z: [0.5, 1.7],
            openings: [1, 3],
            opening_width: [0.3, 0.6],
            opening_height: [0.3, 0.5],
            opening_center_y: [-0.5, 0.5],
            opening_center_z: [0.8, 1.4],
            board_probability: 0.5,
            board_depth: 0.2,
            board_z: [0.7, 1.1],
            clearance_voxels: 1.0,
            attempts: 400,
        }
    }
}

impl ShelfParams {
    /// Parses overrides; missing fields keep their defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("shelf parameters: {e}")))
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] >= r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

/// Solid boxes and cut-outs of one random shelf world.
pub fn shelf_boxes(rng: &mut ChaCha8Rng, p: &ShelfParams, voxel: f64) -> (Vec<Aabb>, Vec<Aabb>) {
    let x = uniform(rng, p.wall_x);
    let wall = Aabb {
        min: [x, p.wall_y[0], p.wall_z[0]],
        max: [x + voxel, p.wall_y[1], p.wall_z[1]],
    };
    let mut solid = vec![wall];
    let n = rng.gen_range(p.openings[0]..=p.openings[1].max(p.openings[0]));
    let holes = (0..n)
        .map(|_| {
            let (w, h) = (uniform(rng, p.opening_width), uniform(rng, p.opening_height));
            let (cy, cz) = (uniform(rng, p.opening_center_y), uniform(rng, p.opening_center_z));
            Aabb {
                min: [x - 1.0, cy - w / 2.0, cz - h / 2.0],
                max: [x + 1.0, cy + w / 2.0, cz + h / 2.0],
            }
        })
        .collect();
    if rng.gen_bool(p.board_probability.clamp(0.0, 1.0)) {
        let z = uniform(rng, p.board_z);
        solid.push(Aabb {
            min: [x - p.board_depth, p.wall_y[0], z],
            max: [x, p.wall_y[1], z + voxel],
        });
    }
    (solid, holes)
}

/// Voxels whose centers lie in a solid box and in no hole.
pub fn rasterize(grid: &VoxelGrid, solid: &[Aabb], holes: &[Aabb]) -> Vec<VoxelId> {
    (0..grid.voxel_count() as VoxelId)
        .filter(|&id| {
            let c = grid.voxel_center(id);
            let c = [c.x, c.y, c.z];
            solid.iter().any(|b| b.contains(c)) && !holes.iter().any(|b| b.contains(c))
        })
        .collect()
}

fn random_config(model: &RobotModel, rng: &mut ChaCha8Rng) -> FullConfig {
    let mut sample = |joints: &[crate::kinematics::Joint]| -> Vec<f64> {
        joints.iter().map(|j| uniform(rng, j.limits)).collect()
    };
    let torso = sample(model.torso_joints());
    let arm1 = sample(model.arm_joints(ChainId::Arm1));
    let arm2 = sample(model.arm_joints(ChainId::Arm2));
    FullConfig::new(torso, arm1, arm2)
}

/// Node ids reachable from `from` over valid nodes of one roadmap.
fn component(dual: &DualRoadmap, chain: ChainId, mask: &ValidityMask, from: NodeId) -> Vec<bool> {
    let r = dual.roadmap(chain);
    let mut seen = vec![false; r.node_count()];
    seen[from as usize] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        for &m in r.neighbors(n) {
            if mask.is_valid(m) && !seen[m as usize] {
                seen[m as usize] = true;
                queue.push_back(m);
            }
        }
    }
    seen
}

/// `count` shelf-world scenarios from one seed. Start and target are random
/// configurations with clearance; each arm's nearest valid node at the
/// target must be reachable from its nearest valid node at the start within
/// that arm's own masked roadmap. Arm-arm interaction is not checked.
pub fn generate_shelf_scenarios(
    dual: &DualRoadmap,
    model: &RobotModel,
    count: usize,
    seed: u64,
    params: &ShelfParams,
) -> Result<Vec<Scenario>> {
    let grid = *dual.voxel_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clearance = params.clearance_voxels * grid.voxel_size;
    let mut out = Vec::with_capacity(count);
    let mut worlds = 0;
    while out.len() < count {
        worlds += 1;
        if worlds > 20 * count + 100 {
            return Err(Error::Input("shelf generator could not place start/target pairs; relax the parameters".into()));
        }
        let (solid, holes) = shelf_boxes(&mut rng, params, grid.voxel_size);
        let ids = rasterize(&grid, &solid, &holes);
        let occ = OccupancySet::from_ids(&grid, ids.iter().copied())?;
        let masks = [
            build_collision_set(dual.roadmap(ChainId::Arm1), &occ)?,
            build_collision_set(dual.roadmap(ChainId::Arm2), &occ)?,
        ];
        let pick = |rng: &mut ChaCha8Rng| -> Option<(FullConfig, [NodeId; 2])> {
            for _ in 0..params.attempts {
                let q = random_config(model, rng);
                if model.config_collision(&q, &occ, clearance).ok()? {
                    continue;
                }
                let mut nodes = [0; 2];
                for chain in ChainId::BOTH {
                    nodes[chain.index()] =
                        nearest_valid_node(dual.roadmap(chain), &masks[chain.index()], &q.chain(chain), None).ok()?;
                }
                return Some((q, nodes));
            }
            None
        };
        let Some((start, s_nodes)) = pick(&mut rng) else { continue };
        let comps = [
            component(dual, ChainId::Arm1, &masks[0], s_nodes[0]),
            component(dual, ChainId::Arm2, &masks[1], s_nodes[1]),
        ];
        let mut found = None;
        for _ in 0..params.attempts {
            let Some((target, t_nodes)) = pick(&mut rng) else { break };
            if comps[0][t_nodes[0] as usize] && comps[1][t_nodes[1] as usize] {
                found = Some(target);
                break;
            }
        }
        let Some(target) = found else { continue };
        out.push(Scenario {
            format_version: Scenario::VERSION,
            name: format!("shelf-{seed}-{:04}", out.len()),
            grid,
            occupied: ids,
            points: vec![],
            start,
            target,
            padding: Some(dual.padding()),
            weights: Some(dual.weights().clone()),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rasterize_wall_with_hole() {
        let grid = VoxelGrid::new([0.0, 0.0, 0.0], 0.1, [10, 10, 10]).unwrap();
        let wall = Aabb {
            min: [0.5, 0.0, 0.0],
            max: [0.6, 1.0, 1.0],
        };
        let hole = Aabb {
            min: [0.0, 0.3, 0.3],
            max: [1.0, 0.5, 0.5],
        };
        let ids = rasterize(&grid, &[wall], &[hole]);
        // One x layer (center 0.55) of 10 x 10, minus the 2 x 2 hole.
        assert_eq!(ids.len(), 96);
        assert!(ids.iter().all(|&id| grid.cell_of_id(id)[0] == 5));
    }

    #[test]
    fn scenario_json_round_trip() {
        let grid = VoxelGrid::new([0.0, 0.0, 0.0], 0.1, [4, 4, 4]).unwrap();
        let s = Scenario {
            format_version: 1,
            name: "t".into(),
            grid,
            occupied: vec![0, 5],
            points: vec![[0.35, 0.35, 0.35], [9.0, 9.0, 9.0]],
            start: FullConfig::zeros(1, 1, 1),
            target: FullConfig::zeros(1, 1, 1),
            padding: None,
            weights: None,
        };
        let text = serde_json::to_string(&s).unwrap();
        let back = Scenario::from_json_str(&text, Path::new("mem")).unwrap();
        assert_eq!(back, s);
        let occ = back.occupancy().unwrap();
        assert_eq!(occ.ids().collect::<Vec<_>>(), vec![0, 5, 63]);
        let bad = text.replace("\"format_version\":1", "\"format_version\":2");
        assert!(Scenario::from_json_str(&bad, Path::new("mem")).is_err());
    }
}
