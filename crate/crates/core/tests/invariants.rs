use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use dualdrm::baselines::{product_astar, product_reachable};
use dualdrm::dual::{build_dual, uniform_grids, DualParams, DualRoadmap, NodePair};
use dualdrm::planner::{plan, validate_trajectory, PlanOptions, PlanRequest};
use dualdrm::roadmap::NodeId;
use dualdrm::search::{dual_graph_search, BlockedEdges, Heuristic, SearchMode, SearchOptions, SearchOutcome};
use dualdrm::{demo, ChainId, FullConfig, OccupancySet, RobotModel, VoxelGrid, VoxelId};
use proptest::prelude::*;

fn mini() -> &'static (RobotModel, DualRoadmap) {
    static CELL: OnceLock<(RobotModel, DualRoadmap)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = demo::mini_description().into_model().unwrap();
        let grid = VoxelGrid::new([-0.8, -0.8, 0.0], 0.1, [16, 16, 12]).unwrap();
        let (t, a) = uniform_grids(&m, PI / 6.0, PI / 4.0, &BTreeMap::new()).unwrap();
        let d = build_dual(&m, t, a, &grid, &DualParams::for_model(&m, &grid), None).unwrap();
        (m, d)
    })
}

fn occupancy(d: &DualRoadmap, voxels: &[u32]) -> OccupancySet {
    let n = d.voxel_grid().voxel_count() as u32;
    OccupancySet::from_ids(d.voxel_grid(), voxels.iter().map(|v| (v % n) as VoxelId)).unwrap()
}

fn pair_from(d: &DualRoadmap, a: u32, b: u32) -> NodePair {
    let r1 = d.roadmap(ChainId::Arm1);
    let a = a % r1.node_count() as NodeId;
    let nodes = d.roadmap(ChainId::Arm2).nodes_at_torso(r1.torso_of(a));
    NodePair::new(a, nodes.start + b % nodes.len() as NodeId)
}

fn heuristic() -> impl Strategy<Value = Heuristic> {
    prop_oneof![Just(Heuristic::ChainMetric), Just(Heuristic::RoadmapDistance)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exhaustive_search_matches_product_graph(
        voxels in prop::collection::vec(any::<u32>(), 0..30),
        ends in any::<[u32; 4]>(),
        h in heuristic(),
    ) {
        let (_, d) = mini();
        let occ = occupancy(d, &voxels);
        let [m1, m2] = d.collision_masks(&occ).unwrap();
        let mm = [&m1, &m2];
        let b = BlockedEdges::new();
        let s = pair_from(d, ends[0], ends[1]);
        let t = pair_from(d, ends[2], ends[3]);
        let opts = SearchOptions { heuristic: h, ..SearchOptions::default() };
        let ex = dual_graph_search(d, mm, &b, s, t, SearchMode::Exhaustive, &opts).unwrap();
        let pr = product_astar(d, mm, &b, s, t, 100_000, h).unwrap();
        let reach = product_reachable(d, mm, &b, s, t, 100_000).unwrap();
        prop_assert_eq!(matches!(pr.outcome, SearchOutcome::Found { .. }), reach);
        match (&ex.outcome, &pr.outcome) {
            (SearchOutcome::Found { cost: a, path }, SearchOutcome::Found { cost: c, .. }) => {
                prop_assert!((a.g1 - c.g1).abs() <= 1e-9 && (a.g2 - c.g2).abs() <= 1e-9);
                prop_assert_eq!(path.first(), Some(&s));
                prop_assert_eq!(path.last(), Some(&t));
                for p in path {
                    prop_assert!(!d.pair_in_collision(*p, &m1, &m2).unwrap());
                }
            }
            (SearchOutcome::NoPath, SearchOutcome::NoPath) => {}
            (x, y) => prop_assert!(false, "exhaustive {:?} vs product {:?}", x, y),
        }
    }

    #[test]
    fn restricted_success_implies_feasible(
        voxels in prop::collection::vec(any::<u32>(), 0..30),
        ends in any::<[u32; 4]>(),
    ) {
        let (_, d) = mini();
        let occ = occupancy(d, &voxels);
        let [m1, m2] = d.collision_masks(&occ).unwrap();
        let b = BlockedEdges::new();
        let s = pair_from(d, ends[0], ends[1]);
        let t = pair_from(d, ends[2], ends[3]);
        let re = dual_graph_search(d, [&m1, &m2], &b, s, t, SearchMode::Restricted, &SearchOptions::default()).unwrap();
        if let SearchOutcome::Found { path, .. } = re.outcome {
            prop_assert!(product_reachable(d, [&m1, &m2], &b, s, t, 100_000).unwrap());
            let (r1, r2) = (d.roadmap(ChainId::Arm1), d.roadmap(ChainId::Arm2));
            for w in path.windows(2) {
                prop_assert!(w[0].arm1 == w[1].arm1 || r1.neighbors(w[0].arm1).contains(&w[1].arm1));
                prop_assert!(w[0].arm2 == w[1].arm2 || r2.neighbors(w[0].arm2).contains(&w[1].arm2));
                prop_assert_eq!(r1.torso_of(w[1].arm1), r2.torso_of(w[1].arm2));
            }
        }
    }

    #[test]
    fn returned_plans_are_collision_free(
        voxels in prop::collection::vec(any::<u32>(), 0..20),
        s in prop::array::uniform6(-1.0f64..1.0),
        g in prop::array::uniform6(-1.0f64..1.0),
    ) {
        let (m, d) = mini();
        let occ = occupancy(d, &voxels);
        // Map [-1, 1] onto each joint's limits.
        let lim: Vec<[f64; 2]> = m.all_joints().map(|j| j.limits).collect();
        let conf = |x: [f64; 6]| {
            let v: Vec<f64> = x.iter().zip(&lim).map(|(u, l)| l[0] + (u + 1.0) * 0.5 * (l[1] - l[0])).collect();
            FullConfig::new(v[0..2].to_vec(), v[2..4].to_vec(), v[4..6].to_vec())
        };
        let (start, target) = (conf(s), conf(g));
        let req = PlanRequest { start: start.clone(), target: target.clone(), occupancy: occ.clone(), options: PlanOptions::default() };
        if let Ok(t) = plan(d, m, &req) {
            prop_assert_eq!(t.waypoints.first(), Some(&start));
            prop_assert_eq!(t.waypoints.last(), Some(&target));
            prop_assert!(validate_trajectory(m, &t.waypoints, &occ, 0.01).unwrap().is_none());
            prop_assert!(t.cost + 1e-12 >= d.weights().full_distance(&start, &target));
        }
    }
}
