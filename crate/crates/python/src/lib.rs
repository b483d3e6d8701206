//! Python module `pycovbai`: instances, single runs, benches and bounds.
//!
//! Arm indices are 0-based on the Python side. The `chosen` and `true_best`
//! columns of bench rows stay 1-based, as in the CSV files.

use covbai::bench::{self as harness, AlgoKind, BenchConfig, BenchRow};
use covbai::complexity;
use covbai::pairwise::DEFAULT_MAX_ROUNDS;
use covbai::{ArmId, BanditInstance, Error, PairStats};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::UnknownScenario(_) | Error::UnknownAlgo(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Instance", module = "pycovbai", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyInstance {
    inner: BanditInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    #[pyo3(signature = (means, covariance, label = "gaussian"))]
    fn gaussian(means: Vec<f64>, covariance: Vec<Vec<f64>>, label: &str) -> PyResult<Self> {
        BanditInstance::gaussian(label, means, covariance).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (means, v_target, label = "bernoulli"))]
    fn bernoulli(means: Vec<f64>, v_target: Vec<f64>, label: &str) -> PyResult<Self> {
        BanditInstance::bernoulli(label, means, v_target).map(|inner| Self { inner }).map_err(to_py)
    }

    /// Preset name or path to an instance JSON file.
    #[staticmethod]
    fn scenario(name: &str) -> PyResult<Self> {
        covbai::scenario(name).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        BanditInstance::from_json_str(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(to_py)
    }

    #[getter]
    fn label(&self) -> &str {
        self.inner.label()
    }

    #[getter]
    fn arms(&self) -> usize {
        self.inner.arms()
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means().to_vec()
    }

    #[getter]
    fn best(&self) -> usize {
        self.inner.best().0
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.inner.kind())
    }

    fn covariance(&self) -> Vec<Vec<f64>> {
        self.inner.covariance().chunks(self.inner.arms()).map(<[f64]>::to_vec).collect()
    }

    /// `Var(X_i - X_j)` for every pair.
    fn difference_variances(&self) -> Vec<Vec<f64>> {
        self.inner.difference_variances().chunks(self.inner.arms()).map(<[f64]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("Instance({:?}, arms={}, best={})", self.inner.label(), self.inner.arms(), self.inner.best().0)
    }
}

/// Running means and pairwise sample variances of jointly observed arms.
#[pyclass(name = "PairStats", module = "pycovbai")]
struct PyPairStats {
    inner: PairStats,
}

#[pymethods]
impl PyPairStats {
    #[new]
    fn new(arms: usize) -> Self {
        Self { inner: PairStats::new(arms) }
    }

    /// One round of observations as `(arm, value)` pairs.
    fn update(&mut self, rewards: Vec<(usize, f64)>) -> PyResult<()> {
        let obs: Vec<(ArmId, f64)> = rewards.into_iter().map(|(a, x)| (ArmId(a), x)).collect();
        self.inner.update(&obs).map_err(to_py)
    }

    #[getter]
    fn t(&self) -> u64 {
        self.inner.t()
    }

    fn mean(&self, arm: usize) -> PyResult<f64> {
        self.inner.mean(ArmId(arm)).map_err(to_py)
    }

    fn pair_variance(&self, i: usize, j: usize) -> PyResult<f64> {
        self.inner.pair_variance(ArmId(i), ArmId(j)).map_err(to_py)
    }
}

/// Accepts a preset name, a JSON path or an `Instance`.
fn resolve(obj: &Bound<'_, PyAny>) -> PyResult<(String, BanditInstance)> {
    if let Ok(inst) = obj.cast::<PyInstance>() {
        let inner = inst.get().inner.clone();
        return Ok((inner.label().to_string(), inner));
    }
    let name: String = obj.extract()?;
    let inst = covbai::scenario(&name).map_err(to_py)?;
    Ok((name, inst))
}

fn row_dict<'py>(py: Python<'py>, r: &BenchRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("scenario", &r.scenario)?;
    d.set_item("algo", &r.algo)?;
    d.set_item("trial", r.trial)?;
    d.set_item("seed", r.seed)?;
    d.set_item("delta", r.delta)?;
    d.set_item("chosen", r.chosen)?;
    d.set_item("true_best", r.true_best)?;
    d.set_item("correct", r.correct)?;
    d.set_item("total_queries", r.total_queries)?;
    d.set_item("rounds", r.rounds)?;
    d.set_item("flag", &r.flag)?;
    d.set_item("wall_ms", r.wall_ms)?;
    Ok(d)
}

#[allow(clippy::too_many_arguments)]
fn config(
    scenarios: Vec<String>,
    algos: &[String],
    delta: f64,
    trials: u64,
    seed: u64,
    max_rounds: u64,
    raw_delta: bool,
    oversample_mult: Option<f64>,
) -> PyResult<BenchConfig> {
    let algos = algos.iter().map(|a| a.parse::<AlgoKind>()).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    Ok(BenchConfig {
        scenarios,
        algos,
        delta,
        trials,
        seed,
        max_rounds,
        raw_delta,
        oversample_mult,
        parallel: true,
    })
}

/// One run. Returns a dict with the outcome, per-arm query counts (0-based
/// arms) and the trace as strings.
#[pyfunction]
#[pyo3(signature = (scenario, algo = "pairwise", delta = 0.1, seed = 0, trial = 0, max_rounds = DEFAULT_MAX_ROUNDS, raw_delta = false, oversample_mult = None))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    scenario: &Bound<'py, PyAny>,
    algo: &str,
    delta: f64,
    seed: u64,
    trial: u64,
    max_rounds: u64,
    raw_delta: bool,
    oversample_mult: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let (name, inst) = resolve(scenario)?;
    let cfg = config(Vec::new(), &[algo.to_string()], delta, 1, seed, max_rounds, raw_delta, oversample_mult)?;
    cfg.validate().map_err(to_py)?;
    let (res, row) = py.detach(|| harness::run_trial(&name, &inst, cfg.algos[0], trial, &cfg)).map_err(to_py)?;
    let d = row_dict(py, &row)?;
    d.set_item("chosen", res.chosen.0)?;
    d.set_item("true_best", inst.best().0)?;
    d.set_item("per_arm_queries", res.per_arm_queries)?;
    d.set_item("events", res.events.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
    Ok(d)
}

/// Bench over preset names or JSON paths; one dict per CSV row.
#[pyfunction(name = "bench")]
#[pyo3(signature = (scenarios, algos, trials = 100, delta = 0.1, seed = 0, max_rounds = DEFAULT_MAX_ROUNDS, raw_delta = false, oversample_mult = None))]
#[allow(clippy::too_many_arguments)]
fn bench_rows<'py>(
    py: Python<'py>,
    scenarios: Vec<String>,
    algos: Vec<String>,
    trials: u64,
    delta: f64,
    seed: u64,
    max_rounds: u64,
    raw_delta: bool,
    oversample_mult: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config(scenarios, &algos, delta, trials, seed, max_rounds, raw_delta, oversample_mult)?;
    let rows = py.detach(|| harness::run_bench(&cfg)).map_err(to_py)?;
    rows.iter().map(|r| row_dict(py, r)).collect()
}

/// Same bench, returned as CSV text.
#[pyfunction]
#[pyo3(signature = (scenarios, algos, trials = 100, delta = 0.1, seed = 0, max_rounds = DEFAULT_MAX_ROUNDS, raw_delta = false, oversample_mult = None))]
#[allow(clippy::too_many_arguments)]
fn bench_csv(
    py: Python<'_>,
    scenarios: Vec<String>,
    algos: Vec<String>,
    trials: u64,
    delta: f64,
    seed: u64,
    max_rounds: u64,
    raw_delta: bool,
    oversample_mult: Option<f64>,
) -> PyResult<String> {
    let cfg = config(scenarios, &algos, delta, trials, seed, max_rounds, raw_delta, oversample_mult)?;
    let rows = py.detach(|| harness::run_bench(&cfg)).map_err(to_py)?;
    let mut buf = Vec::new();
    harness::write_csv(&rows, &mut buf).map_err(to_py)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Complexity quantities of an instance as a flat dict. `lb_bernoulli` is
/// absent when the instance is outside the Bernoulli construction range.
#[pyfunction]
#[pyo3(signature = (scenario, delta = 0.1))]
fn bounds<'py>(py: Python<'py>, scenario: &Bound<'py, PyAny>, delta: f64) -> PyResult<Bound<'py, PyDict>> {
    let (_, inst) = resolve(scenario)?;
    let report = complexity::report(&inst, delta).map_err(to_py)?;
    let d = PyDict::new(py);
    for (name, value) in report.scalars() {
        d.set_item(name, value)?;
    }
    Ok(d)
}

#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    covbai::environments::PRESET_NAMES.to_vec()
}

#[pyfunction]
fn algo_names() -> Vec<&'static str> {
    AlgoKind::ALL.iter().map(|a| a.name()).collect()
}

#[pymodule]
fn pycovbai(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyPairStats>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(bench_rows, m)?)?;
    m.add_function(wrap_pyfunction!(bench_csv, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(algo_names, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER.join(","))?;
    Ok(())
}
