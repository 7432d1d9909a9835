//! `dualdrm`: build dual roadmaps, plan, check trajectories, generate
//! scenarios and run benchmarks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dualdrm::bench::{run_bench, PlannerKind};
use dualdrm::dual::{build_dual, uniform_grids, DualParams, DualRoadmap};
use dualdrm::format::{hash_compatibility, peek_header, Compatibility, FileKind};
use dualdrm::kinematics::RobotDescription;
use dualdrm::planner::{validate_trajectory, FailureKind, PlanFailure, PlanOptions, PlanRequest, TrajectoryFile};
use dualdrm::scenario::{generate_shelf_scenarios, Scenario, ShelfParams};
use dualdrm::search::Heuristic;
use dualdrm::{ChainId, Error, RobotModel, VoxelGrid};

/// Process exit codes.
mod exit {
    pub const INTERNAL: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NODE_CAP: u8 = 3;
    pub const NO_PATH: u8 = 4;
    pub const BUDGET: u8 = 5;
    pub const ENDPOINT_IN_COLLISION: u8 = 6;
    pub const NO_CONNECTABLE_NODE: u8 = 7;
    pub const VALIDATION: u8 = 8;
    pub const IO: u8 = 10;
    pub const FORMAT: u8 = 11;
    pub const INCOMPATIBLE: u8 = 12;
    pub const INVALID_INPUT: u8 = 13;
}

#[derive(Debug)]
struct CliError {
    code: u8,
    kind: String,
    message: String,
}

impl CliError {
    fn new(code: u8, kind: &str, message: impl Into<String>) -> Self {
        Self {
            code,
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(exit::USAGE, "Usage", message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::NodeCapExceeded { .. } => (exit::NODE_CAP, "NodeCapExceeded"),
            Error::PairBudgetExceeded { .. } => (exit::BUDGET, "PairBudgetExceeded"),
            Error::NoConnectableNode(_) => (exit::NO_CONNECTABLE_NODE, "NoConnectableNode"),
            Error::Incompatible(_) => (exit::INCOMPATIBLE, "Incompatible"),
            Error::Format(_) | Error::FileFormat(_) | Error::Json { .. } => (exit::FORMAT, "Format"),
            Error::Io { .. } => (exit::IO, "Io"),
            _ => (exit::INVALID_INPUT, "InvalidInput"),
        };
        Self::new(code, kind, e.to_string())
    }
}

impl From<PlanFailure> for CliError {
    fn from(f: PlanFailure) -> Self {
        let code = match f.kind {
            FailureKind::StartInCollision(_) | FailureKind::TargetInCollision(_) => exit::ENDPOINT_IN_COLLISION,
            FailureKind::NoConnectableNode(_) => exit::NO_CONNECTABLE_NODE,
            FailureKind::NoPath => exit::NO_PATH,
            FailureKind::BudgetExceeded(_) => exit::BUDGET,
            FailureKind::InvalidRequest(_) => exit::INVALID_INPUT,
        };
        Self::new(code, f.kind.name(), f.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "dualdrm", version, about = "Dual-arm whole-body planning over composed dynamic roadmaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dual roadmap for a robot description.
    Build(BuildArgs),
    /// Plan one scenario.
    Plan(PlanArgs),
    /// Re-verify a trajectory against a scenario by dense sampling.
    Check(CheckArgs),
    /// Run planners over a scenario set and write CSV reports.
    Bench(BenchArgs),
    /// Generate seeded shelf-world scenarios.
    Gen(GenArgs),
    /// Print the header and counts of a roadmap file.
    Info(InfoArgs),
}

/// Angle in radians, or `pi/N` / `N*pi/M`.
fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let value = if let Some((num, den)) = t.split_once("pi/") {
        let k = match num.trim_end_matches('*') {
            "" => 1.0,
            n => n.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?,
        };
        k * PI / den.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?
    } else if t == "pi" {
        PI
    } else {
        t.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(format!("{s:?}: step must be a positive angle"));
    }
    Ok(value)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(_) => Err(format!("{s:?}: must be positive")),
        Err(e) => Err(format!("{s:?}: {e}")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(_) => Err(format!("{s:?}: must be non-negative")),
        Err(e) => Err(format!("{s:?}: {e}")),
    }
}

/// `name=lo:hi[,name=lo:hi...]`, angles as in `parse_angle` but signed.
fn parse_joint_ranges(s: &str) -> Result<BTreeMap<String, [f64; 2]>, String> {
    let signed = |v: &str| -> Result<f64, String> {
        let v = v.trim();
        match v.strip_prefix('-') {
            Some(rest) if rest.contains("pi") => parse_angle(rest).map(|x| -x),
            _ if v.contains("pi") => parse_angle(v),
            _ => v.parse::<f64>().map_err(|e| format!("{v:?}: {e}")),
        }
    };
    let mut out = BTreeMap::new();
    for item in s.split(',').filter(|i| !i.trim().is_empty()) {
        let (name, range) = item.split_once('=').ok_or_else(|| format!("{item:?}: expected name=lo:hi"))?;
        let (lo, hi) = range.split_once(':').ok_or_else(|| format!("{item:?}: expected name=lo:hi"))?;
        let (lo, hi) = (signed(lo)?, signed(hi)?);
        if !(lo <= hi) {
            return Err(format!("{item:?}: lo must not exceed hi"));
        }
        out.insert(name.trim().to_string(), [lo, hi]);
    }
    Ok(out)
}

/// `x0,y0,z0,x1,y1,z1` box corners in meters.
fn parse_workspace(s: &str) -> Result<[f64; 6], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let v: [f64; 6] = v.try_into().map_err(|_| "workspace needs six numbers x0,y0,z0,x1,y1,z1".to_string())?;
    if (0..3).any(|i| !(v[i + 3] > v[i])) {
        return Err("workspace max corner must exceed min corner on every axis".into());
    }
    Ok(v)
}

fn parse_planners(s: &str) -> Result<Vec<PlannerKind>, String> {
    s.split(',').map(|p| p.trim().parse::<PlannerKind>().map_err(|e| e.to_string())).collect()
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Dual,
    LeaderFollower,
    ProductOracle,
}

impl From<PlannerArg> for PlannerKind {
    fn from(p: PlannerArg) -> Self {
        match p {
            PlannerArg::Dual => PlannerKind::Dual,
            PlannerArg::LeaderFollower => PlannerKind::LeaderFollower,
            PlannerArg::ProductOracle => PlannerKind::ProductOracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum HeuristicArg {
    RoadmapDistance,
    ChainMetric,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Torso discretization step (radians, or pi/N).
    #[arg(long, default_value = "pi/6", value_parser = parse_angle)]
    torso_step: f64,
    /// Arm discretization step (radians, or pi/N).
    #[arg(long, default_value = "pi/6", value_parser = parse_angle)]
    arm_step: f64,
    /// Narrow joint ranges before discretizing: `name=lo:hi,...`.
    #[arg(long, value_parser = parse_joint_ranges)]
    joint_ranges: Option<BTreeMap<String, [f64; 2]>>,
    #[arg(long, default_value_t = 0.06, value_parser = parse_positive)]
    voxel_size: f64,
    /// Voxelized box `x0,y0,z0,x1,y1,z1` in the robot base frame (meters).
    #[arg(long, default_value = "-1.05,-1.05,0,1.05,1.05,1.9", value_parser = parse_workspace)]
    workspace: [f64; 6],
    /// Sphere inflation for voxel and inter-arm checks; defaults to half a voxel.
    #[arg(long, value_parser = parse_non_negative)]
    padding: Option<f64>,
    /// Joints that may change in one roadmap edge.
    #[arg(long, default_value_t = 2)]
    max_moving_joints: usize,
    #[arg(long)]
    node_cap: Option<usize>,
    #[arg(long)]
    pair_budget: Option<u64>,
}

#[derive(Args)]
struct PlanOpts {
    /// Largest per-joint change between dense collision samples (radians).
    #[arg(long, default_value_t = 0.01, value_parser = parse_positive)]
    resolution: f64,
    /// Wall-clock budget per query, seconds.
    #[arg(long, value_parser = parse_positive)]
    time_budget: Option<f64>,
    /// Failed lazy-check rounds in restricted mode before switching to exhaustive search.
    #[arg(long, default_value_t = 2)]
    retries: u32,
    #[arg(long, default_value_t = 64)]
    max_iterations: u32,
    #[arg(long, value_enum, default_value = "roadmap-distance")]
    heuristic: HeuristicArg,
    #[arg(long)]
    no_shortcut: bool,
    /// Same-torso pair cap for the product-oracle planner.
    #[arg(long, default_value_t = 2_000_000)]
    oracle_pair_budget: u64,
}

impl PlanOpts {
    fn options(&self) -> CliResult<PlanOptions> {
        if self.max_iterations == 0 {
            return Err(CliError::usage("--max-iterations must be at least 1"));
        }
        Ok(PlanOptions {
            resolution: self.resolution,
            max_iterations: self.max_iterations,
            time_budget: self.time_budget.map(Duration::from_secs_f64),
            shortcut: !self.no_shortcut,
            restricted_retries: self.retries,
            heuristic: match self.heuristic {
                HeuristicArg::RoadmapDistance => Heuristic::RoadmapDistance,
                HeuristicArg::ChainMetric => Heuristic::ChainMetric,
            },
            product_pair_budget: self.oracle_pair_budget,
            ..PlanOptions::default()
        })
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    roadmap: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "dual")]
    planner: PlannerArg,
    #[command(flatten)]
    opts: PlanOpts,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0.01, value_parser = parse_positive)]
    resolution: f64,
}

#[derive(Args)]
struct ShelfOpts {
    /// JSON file overriding shelf generation parameters.
    #[arg(long)]
    shelf_params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ShelfOpts {
    fn params(&self) -> CliResult<ShelfParams> {
        match &self.shelf_params {
            None => Ok(ShelfParams::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::new(exit::IO, "Io", format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::new(exit::FORMAT, "Format", format!("{}: {e}", p.display())))
            }
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    roadmap: PathBuf,
    /// Directory of scenario JSON files; when absent, `--count` shelf
    /// scenarios are generated from `--seed`.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[command(flatten)]
    shelf: ShelfOpts,
    /// Comma-separated: dual, leader-follower, product-oracle.
    #[arg(long, default_value = "dual,leader-follower")]
    planner: String,
    #[arg(long, short)]
    out: PathBuf,
    /// Time histogram CSV; defaults to `<out stem>.hist.csv`.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Zero the wall-clock columns so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    opts: PlanOpts,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    roadmap: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[command(flatten)]
    shelf: ShelfOpts,
}

#[derive(Args)]
struct InfoArgs {
    file: PathBuf,
}

fn load_model(path: &Path) -> CliResult<RobotModel> {
    Ok(RobotDescription::load(path)?.into_model()?)
}

fn load_pair(robot: &Path, roadmap: &Path) -> CliResult<(RobotModel, DualRoadmap)> {
    let model = load_model(robot)?;
    let dual = DualRoadmap::load(roadmap)?;
    let dofs = |c: ChainId| dual.roadmap(c).dof();
    let want = |c: ChainId| model.torso_dof() + model.arm_dof(c);
    if dofs(ChainId::Arm1) != want(ChainId::Arm1) || dofs(ChainId::Arm2) != want(ChainId::Arm2) {
        return Err(CliError::new(
            exit::INCOMPATIBLE,
            "Incompatible",
            format!("{} does not match the robot in {}", roadmap.display(), robot.display()),
        ));
    }
    Ok((model, dual))
}

fn check_compat(dual: &DualRoadmap, s: &Scenario, what: &Path) -> CliResult {
    match hash_compatibility(&dual.compat_meta(), &s.compat_meta()) {
        Compatibility::Compatible => Ok(()),
        Compatibility::Mismatch { field, detail } => Err(CliError::new(
            exit::INCOMPATIBLE,
            "Incompatible",
            format!("{}: {field} differs from the roadmap ({detail})", what.display()),
        )),
    }
}

fn cmd_build(a: &BuildArgs) -> CliResult {
    let model = load_model(&a.robot)?;
    let [x0, y0, z0, x1, y1, z1] = a.workspace;
    let v = a.voxel_size;
    let dims = [x1 - x0, y1 - y0, z1 - z0].map(|len| (len / v - 1e-9).ceil().max(1.0) as usize);
    let grid = VoxelGrid::new([x0, y0, z0], v, dims)?;
    let (torso, arms) = uniform_grids(&model, a.torso_step, a.arm_step, &a.joint_ranges.clone().unwrap_or_default())?;
    let mut params = DualParams::for_model(&model, &grid);
    if let Some(p) = a.padding {
        params.padding = p;
    }
    if a.max_moving_joints == 0 {
        return Err(CliError::usage("--max-moving-joints must be at least 1"));
    }
    params.max_moving_joints = a.max_moving_joints;
    if let Some(c) = a.node_cap {
        params.node_cap = c;
    }
    if let Some(b) = a.pair_budget {
        params.pair_budget = b;
    }
    let t = Instant::now();
    let dual = build_dual(&model, torso, arms, &grid, &params, None)?;
    let took = t.elapsed();
    for c in ChainId::BOTH {
        let r = dual.roadmap(c);
        println!(
            "{c}: {} nodes, {} edges, {} collision entries",
            r.node_count(),
            r.edge_count(),
            r.collision_entries()
        );
    }
    println!("torso cells: {}", dual.torso_grid().cell_count());
    println!("voxel grid: {:?} x {} m", grid.dims, grid.voxel_size);
    println!("inter-arm pairs: {}", dual.inter_pair_count());
    println!("build time: {:.3} s", took.as_secs_f64());
    dual.save(&a.out)?;
    let size = std::fs::metadata(&a.out).map(|m| m.len()).unwrap_or(0);
    println!("wrote {} ({size} bytes)", a.out.display());
    Ok(())
}

fn cmd_plan(a: &PlanArgs) -> CliResult {
    let options = a.opts.options()?;
    let (model, dual) = load_pair(&a.robot, &a.roadmap)?;
    let scenario = Scenario::load(&a.scenario)?;
    check_compat(&dual, &scenario, &a.scenario)?;
    let req = PlanRequest {
        start: scenario.start.clone(),
        target: scenario.target.clone(),
        occupancy: scenario.occupancy()?,
        options,
    };
    let planner = PlannerKind::from(a.planner);
    let traj = planner.run(&dual, &model, &req)?;
    TrajectoryFile::new(planner.name(), &traj).save(&a.out)?;
    let s = &traj.stats;
    println!("planner: {planner}");
    println!("waypoints: {}", traj.waypoints.len());
    println!("cost: {:.6}", traj.cost);
    println!(
        "pairs expanded: {} (fallback {}), iterations: {}, blocked: {}, masked: {}",
        s.search.pairs_expanded, s.search.fallback_used, s.iterations, s.blocked_edges, s.masked_nodes
    );
    let t = &s.timing;
    println!(
        "time: {:.4} s (prune {:.4}, connect {:.4}, search {:.4}, check {:.4}, shortcut {:.4})",
        t.total, t.prune, t.connect, t.search, t.check, t.shortcut
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> CliResult {
    let model = load_model(&a.robot)?;
    let traj = TrajectoryFile::load(&a.trajectory)?;
    let scenario = Scenario::load(&a.scenario)?;
    let occ = scenario.occupancy()?;
    let first = traj.waypoints.first().expect("load rejects empty trajectories");
    let last = traj.waypoints.last().expect("load rejects empty trajectories");
    if first != &scenario.start || last != &scenario.target {
        return Err(CliError::new(
            exit::VALIDATION,
            "EndpointMismatch",
            "trajectory does not start at the scenario start and end at its target",
        ));
    }
    match validate_trajectory(&model, &traj.waypoints, &occ, a.resolution)? {
        None => {
            println!("ok: {} waypoints collision-free at resolution {}", traj.waypoints.len(), a.resolution);
            Ok(())
        }
        Some(v) => {
            println!(
                "violation: segment {} sample {}/{} condition {} ({})",
                v.segment, v.sample, v.samples, v.condition, v.description
            );
            Err(CliError::new(
                exit::VALIDATION,
                "Violation",
                format!("segment {} sample {}/{}: condition {} ({})", v.segment, v.sample, v.samples, v.condition, v.description),
            ))
        }
    }
}

fn load_scenario_dir(dir: &Path) -> CliResult<Vec<Scenario>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::new(exit::IO, "Io", format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let mut s = Scenario::load(&p)?;
        if s.name.is_empty() {
            s.name = p.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default();
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(CliError::new(exit::INVALID_INPUT, "InvalidInput", format!("{}: no scenario files", dir.display())));
    }
    Ok(out)
}

fn cmd_bench(a: &BenchArgs) -> CliResult {
    let options = a.opts.options()?;
    parse_planners(&a.planner).map_err(CliError::usage)?;
    let (model, dual) = load_pair(&a.robot, &a.roadmap)?;
    let scenarios = match &a.scenarios {
        Some(dir) => load_scenario_dir(dir)?,
        None => generate_shelf_scenarios(&dual, &model, a.count, a.shelf.seed, &a.shelf.params()?)?,
    };
    let planners = parse_planners(&a.planner).map_err(CliError::usage)?;
    let report = run_bench(&dual, &model, &scenarios, &planners, &options, a.deterministic)?;
    let hist = a.histogram.clone().unwrap_or_else(|| a.out.with_extension("hist.csv"));
    report.write(&a.out, &hist)?;
    print!("{}", report.summary());
    println!("wrote {} and {}", a.out.display(), hist.display());
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> CliResult {
    let (model, dual) = load_pair(&a.robot, &a.roadmap)?;
    let scenarios = generate_shelf_scenarios(&dual, &model, a.count, a.shelf.seed, &a.shelf.params()?)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::new(exit::IO, "Io", format!("{}: {e}", a.out_dir.display())))?;
    for s in &scenarios {
        s.save(a.out_dir.join(format!("{}.json", s.name)))?;
    }
    println!("wrote {} scenarios to {}", scenarios.len(), a.out_dir.display());
    Ok(())
}

fn cmd_info(a: &InfoArgs) -> CliResult {
    let bytes = std::fs::read(&a.file).map_err(|e| CliError::new(exit::IO, "Io", format!("{}: {e}", a.file.display())))?;
    let (kind, compat) = peek_header(&bytes).map_err(Error::from)?;
    println!("kind: {kind:?}");
    println!("compat hash: {compat:016x}");
    println!("size: {} bytes", bytes.len());
    if kind == FileKind::Dual {
        let dual = DualRoadmap::from_bytes(&bytes)?;
        for c in ChainId::BOTH {
            let r = dual.roadmap(c);
            println!("{c}: {} nodes, {} edges, dof {}", r.node_count(), r.edge_count(), r.dof());
        }
        println!("inter-arm pairs: {}", dual.inter_pair_count());
        println!("padding: {}", dual.padding());
        let g = dual.voxel_grid();
        println!("voxel grid: min {:?} size {} dims {:?}", g.min_corner, g.voxel_size, g.dims);
    }
    Ok(())
}

fn configure_threads() -> CliResult {
    let Ok(v) = std::env::var("DUALDRM_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("DUALDRM_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::new(exit::INTERNAL, "Internal", e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Check(a) => cmd_check(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Info(a) => cmd_info(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind, "exit_code": e.code, "message": e.message });
            eprintln!("{line}");
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert!((parse_angle("pi/6").unwrap() - PI / 6.0).abs() < 1e-15);
        assert!((parse_angle("2*pi/3").unwrap() - 2.0 * PI / 3.0).abs() < 1e-15);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("0").is_err());
        assert!(parse_angle("-0.1").is_err());
        assert!(parse_angle("abc").is_err());
    }

    #[test]
    fn joint_ranges() {
        let r = parse_joint_ranges("torso_yaw=-pi/6:pi/6, arm1_elbow=0:1.5").unwrap();
        assert!((r["torso_yaw"][0] + PI / 6.0).abs() < 1e-15);
        assert_eq!(r["arm1_elbow"], [0.0, 1.5]);
        assert!(parse_joint_ranges("a=1:0").is_err());
        assert!(parse_joint_ranges("a").is_err());
    }

    #[test]
    fn workspace() {
        assert_eq!(parse_workspace("0,0,0,1,2,3").unwrap(), [0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        assert!(parse_workspace("0,0,0,1,2").is_err());
        assert!(parse_workspace("0,0,0,0,2,3").is_err());
    }

    #[test]
    fn planners() {
        assert_eq!(
            parse_planners("dual,leader-follower").unwrap(),
            vec![PlannerKind::Dual, PlannerKind::LeaderFollower]
        );
        assert!(parse_planners("dual,qp").is_err());
    }
}
