//! Python bindings for `dalc`.

use std::path::PathBuf;

use dalc::config::{
    config_hash, default_experiment, parse_and_validate, ConfigDocument, DEFAULT_SCENARIO,
};
use dalc::engine::ExperimentOutput;
use dalc::experiment::Mode;
use dalc::graph::{DirectedGraph, Edge};
use dalc::io::{write_timeseries, WeightsArtifact, AGENT_COLUMNS};
use dalc::manipulator::{bundled_robots, ManipulatorParams, ManipulatorState, STANDARD_GRAVITY};
use dalc::rbf::RbfLattice;
use dalc::{compute_metrics, run_experiment, Error, ExperimentConfig};
use nalgebra::{DMatrix, Matrix2, Vector2};
use pyo3::exceptions::{PyArithmeticError, PyIndexError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        Error::Io { .. } | Error::EmptyLog => PyOSError::new_err(msg),
        Error::SingularMass { .. }
        | Error::NumericalBlowup { .. }
        | Error::TorqueCapExceeded { .. } => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows2(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// Communication digraph; node 0 is the leader.
#[pyclass(name = "Graph", frozen)]
struct PyGraph(DirectedGraph);

#[pymethods]
impl PyGraph {
    /// `edges` holds `(parent, child, weight)` triples.
    #[new]
    fn new(node_count: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|(p, c, w)| Edge::new(p, c, w))
            .collect();
        DirectedGraph::new(node_count, &edges)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn chain(followers: usize) -> PyResult<Self> {
        DirectedGraph::chain(followers).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn star(followers: usize) -> PyResult<Self> {
        DirectedGraph::star(followers).map(Self).map_err(to_py)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn has_spanning_tree_from_leader(&self) -> bool {
        self.0.has_spanning_tree_from_leader()
    }

    fn unreachable_followers(&self) -> Vec<usize> {
        self.0.unreachable_followers()
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        rows(&self.0.laplacian().laplacian)
    }

    /// Follower block of the Laplacian.
    fn h(&self) -> Vec<Vec<f64>> {
        rows(&self.0.laplacian().h)
    }

    fn min_real_eigenvalue_h(&self) -> f64 {
        self.0.laplacian().min_real_eigenvalue_h()
    }
}

/// Two-link arm model.
#[pyclass(name = "Manipulator", frozen)]
struct PyManipulator(ManipulatorParams);

#[pymethods]
impl PyManipulator {
    #[new]
    #[pyo3(signature = (m1, m2, l1, l2, i1, i2, lc1=None, lc2=None, gravity=STANDARD_GRAVITY))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        m1: f64,
        m2: f64,
        l1: f64,
        l2: f64,
        i1: f64,
        i2: f64,
        lc1: Option<f64>,
        lc2: Option<f64>,
        gravity: f64,
    ) -> PyResult<Self> {
        let mut p = ManipulatorParams::with_mid_link_com(m1, m2, l1, l2, i1, i2);
        p.lc1 = lc1.unwrap_or(p.lc1);
        p.lc2 = lc2.unwrap_or(p.lc2);
        p.gravity = gravity;
        p.validate().map_err(to_py)?;
        Ok(Self(p))
    }

    /// The five arms of the bundled scenario.
    #[staticmethod]
    fn bundled() -> Vec<Self> {
        bundled_robots().into_iter().map(Self).collect()
    }

    fn mass_matrix(&self, q: [f64; 2]) -> [[f64; 2]; 2] {
        rows2(&self.0.mass_matrix(&Vector2::from(q)))
    }

    fn mass_matrix_rate(&self, q: [f64; 2], qdot: [f64; 2]) -> [[f64; 2]; 2] {
        rows2(
            &self
                .0
                .mass_matrix_rate(&Vector2::from(q), &Vector2::from(qdot)),
        )
    }

    fn coriolis_matrix(&self, q: [f64; 2], qdot: [f64; 2]) -> [[f64; 2]; 2] {
        rows2(
            &self
                .0
                .coriolis_matrix(&Vector2::from(q), &Vector2::from(qdot)),
        )
    }

    fn gravity_vector(&self, q: [f64; 2]) -> [f64; 2] {
        self.0.gravity_vector(&Vector2::from(q)).into()
    }

    fn forward_dynamics(&self, q: [f64; 2], qdot: [f64; 2], tau: [f64; 2]) -> PyResult<[f64; 2]> {
        self.0
            .forward_dynamics(&ManipulatorState::new(q, qdot), &Vector2::from(tau))
            .map(Into::into)
            .map_err(to_py)
    }

    fn inverse_dynamics(&self, q: [f64; 2], qdot: [f64; 2], qddot: [f64; 2]) -> [f64; 2] {
        self.0
            .inverse_dynamics(&ManipulatorState::new(q, qdot), &Vector2::from(qddot))
            .into()
    }

    fn kinetic_energy(&self, q: [f64; 2], qdot: [f64; 2]) -> f64 {
        self.0.kinetic_energy(&ManipulatorState::new(q, qdot))
    }
}

/// Gaussian RBF lattice.
#[pyclass(name = "Lattice", frozen)]
struct PyLattice(RbfLattice);

#[pymethods]
impl PyLattice {
    #[new]
    fn new(dims: usize, nodes_per_dim: usize, ranges: Vec<[f64; 2]>, width: f64) -> PyResult<Self> {
        RbfLattice::new(dims, nodes_per_dim, &ranges, width)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn center(&self, k: usize) -> PyResult<Vec<f64>> {
        if k >= self.0.node_count() {
            return Err(PyIndexError::new_err(format!("node {k} out of range")));
        }
        Ok(self.0.center(k).to_vec())
    }

    fn regressor(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0
            .regressor(&z)
            .map(|s| s.as_slice().to_vec())
            .map_err(to_py)
    }
}

/// Validated experiment configuration.
#[pyclass(name = "Experiment")]
struct PyExperiment(ExperimentConfig);

#[pymethods]
impl PyExperiment {
    /// The bundled five-arm scenario.
    #[staticmethod]
    fn bundled() -> Self {
        Self(default_experiment())
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        parse_and_validate(text).map(Self).map_err(to_py)
    }

    fn to_toml(&self) -> String {
        ConfigDocument::from_experiment(&self.0).to_toml()
    }

    fn config_hash(&self) -> String {
        config_hash(&self.0)
    }

    #[getter]
    fn follower_count(&self) -> usize {
        self.0.follower_count()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.0.duration
    }

    #[setter]
    fn set_duration(&mut self, v: f64) -> PyResult<()> {
        let mut cfg = self.0.clone();
        cfg.duration = v;
        cfg.validate().map_err(to_py)?;
        self.0 = cfg;
        Ok(())
    }

    #[getter]
    fn average_window(&self) -> (f64, f64) {
        self.0.average_window
    }

    #[setter]
    fn set_average_window(&mut self, v: (f64, f64)) -> PyResult<()> {
        let mut cfg = self.0.clone();
        cfg.average_window = v;
        cfg.validate().map_err(to_py)?;
        self.0 = cfg;
        Ok(())
    }

    #[getter]
    fn threads(&self) -> usize {
        self.0.threads
    }

    #[setter]
    fn set_threads(&mut self, v: usize) -> PyResult<()> {
        let mut cfg = self.0.clone();
        cfg.threads = v;
        cfg.validate().map_err(to_py)?;
        self.0 = cfg;
        Ok(())
    }

    /// Learning run.
    fn run(&self, py: Python<'_>) -> PyResult<PyRun> {
        let cfg = self.0.clone();
        let out = py.detach(|| run_experiment(&cfg)).map_err(to_py)?;
        Ok(PyRun { cfg, out })
    }

    /// Frozen-weight run from a weights artifact (JSON text).
    fn replay(&self, py: Python<'_>, weights_json: &str) -> PyResult<PyRun> {
        let mut cfg = self.0.clone();
        let w = WeightsArtifact::from_json(weights_json)
            .and_then(|a| a.weights_for(&cfg))
            .map_err(to_py)?;
        cfg.mode = Mode::Replay(w);
        let out = py.detach(|| run_experiment(&cfg)).map_err(to_py)?;
        Ok(PyRun { cfg, out })
    }
}

/// Result of one run.
#[pyclass(name = "Run", frozen)]
struct PyRun {
    cfg: ExperimentConfig,
    out: ExperimentOutput,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.out.log.samples.iter().map(|s| s.t).collect()
    }

    #[getter]
    fn leader(&self) -> Vec<Vec<f64>> {
        self.out
            .log
            .samples
            .iter()
            .map(|s| s.leader.clone())
            .collect()
    }

    /// Columns of agent `i` (1-based), keyed like the CSV header.
    fn agent<'py>(&self, py: Python<'py>, i: usize) -> PyResult<Bound<'py, PyDict>> {
        let n = self.out.log.follower_count();
        if i == 0 || i > n {
            return Err(PyIndexError::new_err(format!("agent {i} not in 1..={n}")));
        }
        let mut cols: Vec<Vec<f64>> =
            vec![Vec::with_capacity(self.out.log.len()); AGENT_COLUMNS.len()];
        for (t, a) in self.out.log.agent_series(i - 1) {
            let row = [
                t,
                a.e[0],
                a.e[1],
                a.r[0],
                a.r[1],
                a.tau[0],
                a.tau[1],
                a.chi_tilde_norm,
                a.a_tilde_fro,
                a.nn_residual,
            ];
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(v);
            }
        }
        let d = PyDict::new(py);
        for (name, col) in AGENT_COLUMNS.iter().zip(cols) {
            d.set_item(*name, col)?;
        }
        Ok(d)
    }

    /// Weights artifact JSON, present after a learning run.
    fn weights_json(&self) -> Option<String> {
        self.out
            .averaged_weights
            .as_ref()
            .map(|w| WeightsArtifact::new(&self.cfg, w).to_json())
    }

    fn summary_json(&self) -> PyResult<String> {
        let s = compute_metrics(&self.out.log, &self.cfg.metric_settings()).map_err(to_py)?;
        serde_json::to_string_pretty(&s).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn write_csv(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        write_timeseries(&self.out.log, &dir).map_err(to_py)
    }
}

/// Built-in invariant checks as `(name, passed, detail)`.
#[pyfunction]
fn verify(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(dalc::verify::run_builtin_checks)
        .into_iter()
        .map(|r| (r.name.to_string(), r.passed, r.detail))
        .collect()
}

#[pyfunction]
fn default_scenario() -> &'static str {
    DEFAULT_SCENARIO
}

#[pyfunction]
fn closed_form_default_leader(t: f64) -> Vec<f64> {
    dalc::leader::closed_form_default_leader(t)
        .as_slice()
        .to_vec()
}

#[pymodule]
fn dalc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyManipulator>()?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyExperiment>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(default_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_default_leader, m)?)?;
    Ok(())
}
