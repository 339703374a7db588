//! Python bindings. Structured results cross the boundary as plain
//! dicts and lists.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use regretforge::games::{make_biased_shapley, make_leduc, LeducSpec};
use regretforge::harness::{self, ExperimentConfig, HarnessError, Tables};
use regretforge::npcfr::{self, Checkpoint, GameDistribution, PredictorParams, TrainConfig};
use regretforge::regret::{cfr_solve, RegretPredictor, SolveConfig};
use regretforge::{Algorithm, CheckpointError, GameTree};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(_) | HarnessError::Game(_) => value_err(e),
        HarnessError::Io { .. } | HarnessError::Checkpoint(CheckpointError::Io { .. }) => PyIOError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(value_err)
}

/// An extensive-form game.
#[pyclass(name = "Game", module = "regretforge_py", frozen)]
struct PyGame {
    inner: GameTree,
}

#[pymethods]
impl PyGame {
    #[staticmethod]
    fn biased_shapley(eta: f64) -> PyResult<Self> {
        Ok(PyGame {
            inner: make_biased_shapley(eta).map_err(value_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (players = 2, beta = 1.0))]
    fn leduc(players: usize, beta: f64) -> PyResult<Self> {
        Ok(PyGame {
            inner: make_leduc(LeducSpec::new(players, beta)).map_err(value_err)?,
        })
    }

    #[getter]
    fn players(&self) -> usize {
        self.inner.players()
    }

    #[getter]
    fn num_infostates(&self) -> usize {
        self.inner.num_infostates()
    }

    #[getter]
    fn num_terminals(&self) -> usize {
        self.inner.num_terminals()
    }

    #[getter]
    fn num_slots(&self) -> usize {
        self.inner.num_slots()
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(players={}, infostates={}, terminals={})",
            self.inner.players(),
            self.inner.num_infostates(),
            self.inner.num_terminals()
        )
    }
}

/// Learned regret predictor.
#[pyclass(name = "Predictor", module = "regretforge_py", frozen)]
struct PyPredictor {
    inner: Arc<PredictorParams>,
}

#[pymethods]
impl PyPredictor {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ckpt = Checkpoint::load(&path).map_err(|e| harness_err(e.into()))?;
        Ok(PyPredictor {
            inner: Arc::new(ckpt.params),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        Checkpoint {
            params: (*self.inner).clone(),
            training: None,
        }
        .save(&path)
        .map_err(|e| harness_err(e.into()))
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.num_parameters()
    }

    /// Architecture as a dict.
    fn architecture(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.architecture)
    }
}

/// Runs `steps` iterations of `algorithm` and returns the metrics at every
/// power-of-two step.
#[pyfunction]
#[pyo3(signature = (game, algorithm, steps, predictor = None))]
fn solve(
    py: Python<'_>,
    game: &PyGame,
    algorithm: &str,
    steps: usize,
    predictor: Option<&PyPredictor>,
) -> PyResult<Py<PyAny>> {
    let alg: Algorithm = algorithm.parse().map_err(value_err)?;
    let mut cfg = SolveConfig::new(alg, steps).with_power_of_two_checkpoints();
    if let Some(p) = predictor {
        cfg = cfg.with_predictor(p.inner.clone() as Arc<dyn RegretPredictor>);
    }
    let trace = py
        .detach(|| cfr_solve(&game.inner, &cfg))
        .map_err(|e| harness_err(e.into()))?;
    let rows: Vec<_> = trace
        .evaluations()
        .iter()
        .map(|e| {
            serde_json::json!({
                "step": e.step, "nash_gap": e.nash_gap, "cce_gap": e.cce_gap,
                "efm": e.efm, "regret_bound": e.regret_bound,
            })
        })
        .collect();
    to_py(py, &rows)
}

/// Meta-trains a predictor. Both arguments are JSON documents, e.g.
/// `'{"family": "biased_shapley", "low": 0, "high": 0.5}'` and
/// `'{"epochs": 64}'`. Returns `(predictor, losses)`.
#[pyfunction]
#[pyo3(signature = (distribution, config = "{}"))]
fn train(py: Python<'_>, distribution: &str, config: &str) -> PyResult<(PyPredictor, Vec<f64>)> {
    let dist: GameDistribution = from_json(distribution)?;
    let cfg: TrainConfig = from_json(config)?;
    let outcome = py
        .detach(|| npcfr::train(&dist, &cfg, |_| {}))
        .map_err(|e| harness_err(e.into()))?;
    Ok((
        PyPredictor {
            inner: Arc::new(outcome.params),
        },
        outcome.log.iter().map(|r| r.loss).collect(),
    ))
}

/// Runs an evaluation sweep from a JSON experiment config and returns
/// `{"rows": [...], "tables": {...}}`.
#[pyfunction]
#[pyo3(signature = (config, predictor = None))]
fn evaluate(py: Python<'_>, config: &str, predictor: Option<&PyPredictor>) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_json(config).map_err(harness_err)?;
    let p = predictor.map(|p| p.inner.clone());
    let out = py.detach(|| harness::run_eval(&cfg, p)).map_err(harness_err)?;
    let tables = Tables::build(&out.rows, &cfg.thresholds);
    to_py(py, &serde_json::json!({ "rows": out.rows, "tables": tables }))
}

/// Checks the biased-Shapley closed forms at each `eta`.
#[pyfunction]
fn oracle(py: Python<'_>, etas: Vec<f64>) -> PyResult<Py<PyAny>> {
    let rows = harness::oracle_sweep(&etas).map_err(harness_err)?;
    to_py(py, &rows)
}

/// Runs the finite-difference gradient suite.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn gradcheck(py: Python<'_>, seed: u64) -> PyResult<Py<PyAny>> {
    let checks = py.detach(|| harness::gradcheck_suite(seed)).map_err(harness_err)?;
    let rows: Vec<_> = checks
        .iter()
        .map(|c| serde_json::json!({ "name": c.name, "max_rel_error": c.max_rel_error, "passed": c.passed() }))
        .collect();
    to_py(py, &rows)
}

#[pymodule]
pub fn regretforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_class::<PyPredictor>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add("ALGORITHMS", Algorithm::ALL.iter().map(|a| a.tag()).collect::<Vec<_>>())?;
    Ok(())
}
