//! Python bindings. Labels cross this boundary 1-based, as in instance files.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use boc_core::agent::{self, Algorithm, TrialConfig};
use boc_core::harness::{self, ExperimentConfig, SummaryRow};
use boc_core::model::{self, DatasetFormat, Partition, SyntheticKind};
use boc_core::{clustering, hardness, thresholds, Error, ThresholdKind};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        Error::NotConverged { .. } | Error::Internal(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> PyResult<T> {
    s.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {s:?}")))
}

#[pyclass(name = "Instance", module = "boc", frozen)]
struct PyInstance {
    inner: model::Instance,
}

#[pymethods]
impl PyInstance {
    /// `labels` are 1-based cluster indices, one per arm.
    #[new]
    fn new(labels: Vec<usize>, centers: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = model::Instance::from_one_based(&labels, centers).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::Instance::from_json_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::Instance::read_json(path).map_err(to_py)?,
        })
    }

    /// One of "easy", "moderate", "challenging".
    #[staticmethod]
    fn synthetic(kind: &str) -> PyResult<Self> {
        let kind: SyntheticKind = parse("instance kind", kind)?;
        Ok(Self {
            inner: model::synthetic_instance(kind),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, d, label_column=None, delimiter=',', has_header=false))]
    fn load_dataset(
        path: &str,
        d: usize,
        label_column: Option<usize>,
        delimiter: char,
        has_header: bool,
    ) -> PyResult<Self> {
        if !delimiter.is_ascii() {
            return Err(PyValueError::new_err("delimiter must be ASCII"));
        }
        let format = DatasetFormat {
            d,
            label_column,
            delimiter: delimiter as u8,
            has_header,
        };
        Ok(Self {
            inner: model::load_dataset(path, &format).map_err(to_py)?,
        })
    }

    /// Returns the instance scaled so that its hardness equals `target`,
    /// together with the scale factor.
    fn rescaled(&self, target: f64) -> PyResult<(Self, f64)> {
        let (inner, s) = model::rescale_to_hardness(&self.inner, target).map_err(to_py)?;
        Ok((Self { inner }, s))
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.partition().to_one_based()
    }

    #[getter]
    fn centers(&self) -> Vec<Vec<f64>> {
        self.inner.centers().to_vec()
    }

    #[getter]
    fn arm_means(&self) -> Vec<Vec<f64>> {
        self.inner.arm_means()
    }

    #[getter]
    fn num_arms(&self) -> usize {
        self.inner.num_arms()
    }

    #[getter]
    fn num_clusters(&self) -> usize {
        self.inner.num_clusters()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(M={}, K={}, d={})",
            self.inner.num_arms(),
            self.inner.num_clusters(),
            self.inner.dim()
        )
    }
}

#[pyclass(name = "HardnessSolution", module = "boc", frozen, get_all)]
struct PyHardness {
    d_star: f64,
    w_star: Vec<f64>,
    lambda_star: Vec<f64>,
    gap: f64,
    iterations: usize,
}

#[pymethods]
impl PyHardness {
    fn __repr__(&self) -> String {
        format!(
            "HardnessSolution(d_star={}, gap={:.1e})",
            self.d_star, self.gap
        )
    }
}

#[pyclass(name = "TrialRecord", module = "boc", frozen, get_all)]
struct PyTrialRecord {
    algorithm: String,
    delta: f64,
    seed: u64,
    tau: u64,
    correct: bool,
    terminated: bool,
    wall_ms: f64,
    recommended: Option<Vec<usize>>,
}

#[pymethods]
impl PyTrialRecord {
    fn __repr__(&self) -> String {
        format!(
            "TrialRecord(algorithm={:?}, delta={}, tau={}, correct={})",
            self.algorithm, self.delta, self.tau, self.correct
        )
    }
}

#[pyclass(name = "SummaryRow", module = "boc", frozen, get_all)]
struct PySummaryRow {
    algorithm: String,
    delta: f64,
    trials: usize,
    mean_tau: f64,
    std_tau: f64,
    errors: usize,
    nonterminated: usize,
    lower_bound: f64,
}

impl From<&SummaryRow> for PySummaryRow {
    fn from(r: &SummaryRow) -> Self {
        Self {
            algorithm: r.algorithm.to_string(),
            delta: r.delta,
            trials: r.trials,
            mean_tau: r.mean_tau,
            std_tau: r.std_tau,
            errors: r.errors,
            nonterminated: r.nonterminated,
            lower_bound: r.lower_bound,
        }
    }
}

#[pymethods]
impl PySummaryRow {
    fn __repr__(&self) -> String {
        format!(
            "SummaryRow(algorithm={:?}, delta={}, mean_tau={:.1}, std_tau={:.1}, errors={})",
            self.algorithm, self.delta, self.mean_tau, self.std_tau, self.errors
        )
    }
}

#[pyfunction]
fn solve_dstar(py: Python<'_>, instance: &PyInstance) -> PyResult<PyHardness> {
    let inst = instance.inner.clone();
    let sol = py.detach(|| hardness::solve_dstar(&inst)).map_err(to_py)?;
    Ok(PyHardness {
        d_star: sol.d_star,
        w_star: sol.w_star.values().to_vec(),
        lambda_star: sol.lambda_star.values().to_vec(),
        gap: sol.gap,
        iterations: sol.iterations,
    })
}

/// Closed-form infimum of the weighted distance to an alternative instance.
#[pyfunction]
fn alt_inf(labels: Vec<usize>, centers: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<f64> {
    let partition = Partition::from_one_based(&labels, centers.len()).map_err(to_py)?;
    hardness::alt_inf_closed_form(&partition, &centers, &weights).map_err(to_py)
}

#[pyfunction]
fn lower_bound(delta: f64, d_star: f64) -> PyResult<f64> {
    hardness::lower_bound(delta, d_star).map_err(to_py)
}

#[pyfunction]
fn riemann_zeta(s: f64) -> PyResult<f64> {
    thresholds::riemann_zeta(s).map_err(to_py)
}

#[pyfunction]
fn psi(x: f64) -> PyResult<f64> {
    thresholds::psi(x).map_err(to_py)
}

#[pyfunction]
fn beta(delta: f64, counts: Vec<u64>, d: usize) -> PyResult<f64> {
    thresholds::beta(delta, &counts, d).map_err(to_py)
}

#[pyfunction]
fn beta_heuristic(delta: f64, t: f64, d: usize) -> PyResult<f64> {
    thresholds::beta_heuristic(delta, t, d).map_err(to_py)
}

/// Returns `(labels, centers, iterations, converged)` with 1-based labels.
#[pyfunction]
#[pyo3(signature = (points, weights, k, max_iters=clustering::DEFAULT_MAX_ITERS))]
fn weighted_kmeans(
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    k: usize,
    max_iters: usize,
) -> PyResult<(Vec<usize>, Vec<Vec<f64>>, usize, bool)> {
    let r = clustering::weighted_kmeans(&points, &weights, k, None, max_iters).map_err(to_py)?;
    Ok((
        r.partition.to_one_based(),
        r.centers,
        r.iterations,
        r.converged,
    ))
}

#[pyfunction]
#[pyo3(signature = (instance, algorithm, delta, seed, threshold="heuristic", max_steps=10_000_000))]
fn run_trial(
    py: Python<'_>,
    instance: &PyInstance,
    algorithm: &str,
    delta: f64,
    seed: u64,
    threshold: &str,
    max_steps: u64,
) -> PyResult<PyTrialRecord> {
    let alg: Algorithm = parse("algorithm", algorithm)?;
    let kind: ThresholdKind = parse("threshold", threshold)?;
    let cfg = TrialConfig::new(alg, delta, seed)
        .threshold(kind)
        .max_steps(max_steps);
    let inst = instance.inner.clone();
    let rec = py
        .detach(|| agent::run_trial(&inst, cfg, None))
        .map_err(to_py)?;
    Ok(PyTrialRecord {
        algorithm: rec.algorithm.to_string(),
        delta: rec.delta,
        seed: rec.seed,
        tau: rec.tau,
        correct: rec.correct,
        terminated: rec.terminated,
        wall_ms: rec.wall_ms,
        recommended: rec.recommended.map(|p| p.to_one_based()),
    })
}

/// Runs the experiment described by a JSON config file, writes its outputs
/// and returns the summary rows.
#[pyfunction]
#[pyo3(signature = (config_path, write_outputs=true))]
fn run_experiment(
    py: Python<'_>,
    config_path: &str,
    write_outputs: bool,
) -> PyResult<Vec<PySummaryRow>> {
    let cfg = ExperimentConfig::from_file(config_path).map_err(to_py)?;
    let out = py
        .detach(|| -> boc_core::Result<_> {
            let out = harness::run_experiment(&cfg)?;
            if write_outputs {
                harness::emit(
                    &out.records,
                    &out.summary,
                    &cfg.trials_path(),
                    &cfg.summary_path(),
                )?;
            }
            Ok(out)
        })
        .map_err(to_py)?;
    Ok(out.summary.iter().map(PySummaryRow::from).collect())
}

#[pymodule]
fn boc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyHardness>()?;
    m.add_class::<PyTrialRecord>()?;
    m.add_class::<PySummaryRow>()?;
    m.add_function(wrap_pyfunction!(solve_dstar, m)?)?;
    m.add_function(wrap_pyfunction!(alt_inf, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(riemann_zeta, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(beta_heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
