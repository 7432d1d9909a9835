//! Python bindings: robot models, dual roadmaps, scenarios, planning and
//! trajectory checking.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dualdrm::bench::PlannerKind;
use dualdrm::dual::{build_dual, uniform_grids, DualParams, DualRoadmap, NodePair};
use dualdrm::format::{hash_compatibility, Compatibility};
use dualdrm::planner::{validate_trajectory, PlanOptions, PlanRequest, Trajectory};
use dualdrm::scenario::{generate_shelf_scenarios, Scenario, ShelfParams};
use dualdrm::{demo, ChainId, Error, FullConfig, RobotModel, VoxelGrid};

create_exception!(dualdrm_py, PlanningError, PyRuntimeError);
create_exception!(dualdrm_py, IncompatibleError, PyValueError);

/// (torso, arm1, arm2) joint vectors.
type Config = (Vec<f64>, Vec<f64>, Vec<f64>);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Incompatible(_) => IncompatibleError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn full(c: Config) -> FullConfig {
    FullConfig::new(c.0, c.1, c.2)
}

fn tuple(c: &FullConfig) -> Config {
    (c.torso.clone(), c.arm1.clone(), c.arm2.clone())
}

#[pyclass(name = "RobotModel", module = "dualdrm_py", frozen)]
struct PyRobot {
    inner: RobotModel,
}

#[pymethods]
impl PyRobot {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: RobotModel::from_file(path).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RobotModel::from_json_str(text).map_err(to_py)? })
    }

    /// One of the bundled demo robots: "tiny", "mini" or "desk".
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let desc = match name {
            "tiny" => demo::tiny_description(),
            "mini" => demo::mini_description(),
            "desk" => demo::desk_description(),
            _ => return Err(PyValueError::new_err(format!("unknown robot {name:?}"))),
        };
        Ok(Self { inner: desc.into_model().map_err(to_py)? })
    }

    #[getter]
    fn dofs(&self) -> (usize, usize, usize) {
        let m = &self.inner;
        (m.torso_dof(), m.arm_dof(ChainId::Arm1), m.arm_dof(ChainId::Arm2))
    }

    fn zero_config(&self) -> Config {
        tuple(&self.inner.zero_config())
    }

    /// Collision condition number (1 to 5) of `config` in `scenario`, or None.
    #[pyo3(signature = (config, scenario, padding = 0.0))]
    fn collision(&self, config: Config, scenario: &PyScenario, padding: f64) -> PyResult<Option<u8>> {
        let occ = scenario.inner.occupancy().map_err(to_py)?;
        let c = self.inner.collision_condition(&full(config), &occ, padding).map_err(to_py)?;
        Ok(c.map(|c| c.number()))
    }

    fn __repr__(&self) -> String {
        let (t, a, b) = self.dofs();
        format!("RobotModel(torso={t}, arm1={a}, arm2={b})")
    }
}

#[pyclass(name = "Scenario", module = "dualdrm_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Scenario::load(path).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Scenario::from_json_str(text, std::path::Path::new("<string>")).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn start(&self) -> Config {
        tuple(&self.inner.start)
    }

    #[getter]
    fn target(&self) -> Config {
        tuple(&self.inner.target)
    }

    #[getter]
    fn occupied_voxels(&self) -> PyResult<usize> {
        Ok(self.inner.occupancy().map_err(to_py)?.len())
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?})", self.inner.name)
    }
}

#[pyclass(name = "DualRoadmap", module = "dualdrm_py", frozen)]
struct PyDual {
    inner: DualRoadmap,
}

#[pymethods]
impl PyDual {
    /// Builds on uniform joint grids over an axis-aligned voxel workspace.
    #[staticmethod]
    #[pyo3(signature = (robot, torso_step, arm_step, origin, voxel_size, dims, padding = None, joint_ranges = None))]
    #[allow(clippy::too_many_arguments)]
    fn build(
        py: Python<'_>,
        robot: &PyRobot,
        torso_step: f64,
        arm_step: f64,
        origin: [f64; 3],
        voxel_size: f64,
        dims: [usize; 3],
        padding: Option<f64>,
        joint_ranges: Option<BTreeMap<String, [f64; 2]>>,
    ) -> PyResult<Self> {
        let model = &robot.inner;
        let grid = VoxelGrid::new(origin, voxel_size, dims).map_err(to_py)?;
        let (torso, arms) = uniform_grids(model, torso_step, arm_step, &joint_ranges.unwrap_or_default()).map_err(to_py)?;
        let mut params = DualParams::for_model(model, &grid);
        if let Some(p) = padding {
            params.padding = p;
        }
        let dual = py
            .detach(|| build_dual(model, torso, arms, &grid, &params, None))
            .map_err(to_py)?;
        Ok(Self { inner: dual })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: DualRoadmap::load(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    /// Node and edge counts per arm.
    fn counts(&self) -> ((usize, usize), (usize, usize)) {
        let c = |ch| {
            let r = self.inner.roadmap(ch);
            (r.node_count(), r.edge_count())
        };
        (c(ChainId::Arm1), c(ChainId::Arm2))
    }

    #[getter]
    fn inter_pairs(&self) -> usize {
        self.inner.inter_pair_count()
    }

    #[getter]
    fn padding(&self) -> f64 {
        self.inner.padding()
    }

    fn compose(&self, arm1: u32, arm2: u32) -> PyResult<Config> {
        Ok(tuple(&self.inner.compose(NodePair::new(arm1, arm2)).map_err(to_py)?))
    }

    /// True when the node pair is unusable under `scenario`: an inter-arm
    /// contact or either node hit by an occupied voxel.
    fn pair_in_collision(&self, arm1: u32, arm2: u32, scenario: &PyScenario) -> PyResult<bool> {
        let occ = scenario.inner.occupancy().map_err(to_py)?;
        let [m1, m2] = self.inner.collision_masks(&occ).map_err(to_py)?;
        self.inner.pair_in_collision(NodePair::new(arm1, arm2), &m1, &m2).map_err(to_py)
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }

    fn __repr__(&self) -> String {
        let ((n1, _), (n2, _)) = self.counts();
        format!("DualRoadmap(arm1_nodes={n1}, arm2_nodes={n2}, inter_pairs={})", self.inner.inter_pair_count())
    }
}

fn trajectory_dict<'py>(py: Python<'py>, planner: PlannerKind, t: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("planner", planner.name())?;
    d.set_item("waypoints", t.waypoints.iter().map(tuple).collect::<Vec<_>>())?;
    d.set_item("cost", t.cost)?;
    d.set_item("pairs_expanded", t.stats.search.pairs_expanded)?;
    d.set_item("fallback_used", t.stats.search.fallback_used)?;
    d.set_item("iterations", t.stats.iterations)?;
    d.set_item("time_s", t.stats.timing.total)?;
    Ok(d)
}

/// Plans from the scenario's start to its target. Returns a dict with
/// waypoints, cost and search statistics; raises PlanningError on failure.
#[pyfunction]
#[pyo3(signature = (dual, robot, scenario, planner = "dual", resolution = 0.01, time_budget = None))]
fn plan<'py>(
    py: Python<'py>,
    dual: &PyDual,
    robot: &PyRobot,
    scenario: &PyScenario,
    planner: &str,
    resolution: f64,
    time_budget: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: PlannerKind = planner.parse().map_err(to_py)?;
    let s = &scenario.inner;
    if let Compatibility::Mismatch { field, detail } = hash_compatibility(&dual.inner.compat_meta(), &s.compat_meta()) {
        return Err(IncompatibleError::new_err(format!("{field} differs from the roadmap ({detail})")));
    }
    let req = PlanRequest {
        start: s.start.clone(),
        target: s.target.clone(),
        occupancy: s.occupancy().map_err(to_py)?,
        options: PlanOptions {
            resolution,
            time_budget: time_budget.map(Duration::from_secs_f64),
            ..PlanOptions::default()
        },
    };
    let out = py.detach(|| kind.run(&dual.inner, &robot.inner, &req));
    match out {
        Ok(t) => trajectory_dict(py, kind, &t),
        Err(f) => Err(PlanningError::new_err((f.kind.name(), f.to_string()))),
    }
}

/// Re-checks a waypoint list densely with zero padding. Returns None when
/// free, otherwise a dict describing the first colliding sample.
#[pyfunction]
#[pyo3(signature = (robot, waypoints, scenario, resolution = 0.01))]
fn validate<'py>(
    py: Python<'py>,
    robot: &PyRobot,
    waypoints: Vec<Config>,
    scenario: &PyScenario,
    resolution: f64,
) -> PyResult<Option<Bound<'py, PyDict>>> {
    let occ = scenario.inner.occupancy().map_err(to_py)?;
    let wps: Vec<FullConfig> = waypoints.into_iter().map(full).collect();
    let Some(v) = validate_trajectory(&robot.inner, &wps, &occ, resolution).map_err(to_py)? else {
        return Ok(None);
    };
    let d = PyDict::new(py);
    d.set_item("segment", v.segment)?;
    d.set_item("sample", v.sample)?;
    d.set_item("condition", v.condition)?;
    d.set_item("description", v.description)?;
    d.set_item("config", tuple(&v.config))?;
    Ok(Some(d))
}

/// Seeded shelf scenarios for `dual`. `params` is an optional JSON string
/// with shelf generator overrides.
#[pyfunction]
#[pyo3(signature = (dual, robot, count, seed, params = None))]
fn generate_scenarios(
    py: Python<'_>,
    dual: &PyDual,
    robot: &PyRobot,
    count: usize,
    seed: u64,
    params: Option<&str>,
) -> PyResult<Vec<PyScenario>> {
    let params: ShelfParams = match params {
        Some(text) => ShelfParams::from_json_str(text).map_err(to_py)?,
        None => ShelfParams::default(),
    };
    let out = py
        .detach(|| generate_shelf_scenarios(&dual.inner, &robot.inner, count, seed, &params))
        .map_err(to_py)?;
    Ok(out.into_iter().map(|inner| PyScenario { inner }).collect())
}

#[pymodule]
fn dualdrm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRobot>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyDual>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenarios, m)?)?;
    m.add("PlanningError", m.py().get_type::<PlanningError>())?;
    m.add("IncompatibleError", m.py().get_type::<IncompatibleError>())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use pyo3::types::PyAnyMethods;

    use super::*;

    #[test]
    fn plan_and_validate_round_trip() {
        Python::initialize();
        Python::attach(|py| {
            let robot = PyRobot::builtin("mini").unwrap();
            assert_eq!(robot.dofs(), (2, 2, 2));
            let dual = PyDual::build(py, &robot, PI / 6.0, PI / 6.0, [-0.8, -0.8, 0.0], 0.1, [16, 16, 12], None, None).unwrap();
            let ((n1, _), (n2, _)) = dual.counts();
            assert!(n1 > 0 && n1 == n2);

            let mut s = generate_scenarios(py, &dual, &robot, 1, 3, Some(r#"{"board_probability": 0}"#)).unwrap().remove(0);
            s.inner.target = s.inner.start.clone();
            let out = plan(py, &dual, &robot, &s, "dual", 0.01, None).unwrap();
            let cost: f64 = out.get_item("cost").unwrap().unwrap().extract().unwrap();
            assert_eq!(cost, 0.0);
            let wps: Vec<Config> = out.get_item("waypoints").unwrap().unwrap().extract().unwrap();
            assert!(validate(py, &robot, wps, &s, 0.01).unwrap().is_none());

            let err = plan(py, &dual, &robot, &s, "nope", 0.01, None).unwrap_err();
            assert!(err.is_instance_of::<PyValueError>(py));
            assert!(PyRobot::builtin("huge").is_err());
        });
    }
}
