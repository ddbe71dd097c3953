//! Python bindings: datasets, reference solutions, solver runs and robust
//! loss evaluation.

use std::path::PathBuf;

use drsl_core::cli::{reported_iterate, run_solver};
use drsl_core::config::{ConfigMap, ExperimentConfig};
use drsl_core::data::{load_dataset, save_dataset, synth_generate, SynthSpec};
use drsl_core::eval::{reference_cached, robust_loss_w, test_metrics, ReferenceCache};
use drsl_core::solvers::SolverTrace;
use drsl_core::{Error, LinkFunction, ProblemParams, ReferenceOptions, ReferenceSolution};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

create_exception!(
    drsl,
    DivergenceError,
    PyException,
    "A solver iterate became non-finite or unbounded."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Divergence(_) => DivergenceError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn params(delta: f64, kappa: f64, link: &str) -> PyResult<ProblemParams> {
    let link: LinkFunction = link.parse().map_err(to_py)?;
    ProblemParams::new(delta, kappa, link).map_err(to_py)
}

/// Normalized binary classification data.
#[pyclass(frozen, module = "drsl")]
struct Dataset {
    inner: drsl_core::Dataset,
}

#[pymethods]
impl Dataset {
    /// Synthetic data with Gaussian features and noisy linear labels.
    #[staticmethod]
    #[pyo3(signature = (n, d, seed=0, noise_var=0.2))]
    fn synthetic(n: usize, d: usize, seed: u64, noise_var: f64) -> PyResult<Self> {
        let mut spec = SynthSpec::new(n, d, seed);
        spec.noise_var = noise_var;
        let (inner, _) = synth_generate(&spec).map_err(to_py)?;
        Ok(Dataset { inner })
    }

    /// Dataset cache file or LIBSVM text.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Dataset {
            inner: load_dataset(&path).map_err(to_py)?,
        })
    }

    /// Dense rows and ±1 labels, used as given (no rescaling).
    #[staticmethod]
    fn from_dense(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> PyResult<Self> {
        Ok(Dataset {
            inner: drsl_core::Dataset::from_dense(&rows, &labels).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_dataset(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    /// Factor applied to the raw features during normalization.
    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn labels(&self) -> Vec<f64> {
        self.inner.labels().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, d={}, scale={})",
            self.inner.n(),
            self.inner.d(),
            self.inner.scale()
        )
    }
}

/// Outcome of one solver run.
#[pyclass(frozen, module = "drsl")]
struct Trace {
    trace: SolverTrace,
    reference: ReferenceSolution,
}

#[pymethods]
impl Trace {
    #[getter]
    fn algo(&self) -> &'static str {
        self.trace.algo.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.trace.seed
    }

    #[getter]
    fn f_star(&self) -> f64 {
        self.reference.f_star
    }

    /// Checkpoints as a list of dicts with the trace CSV columns.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let out = PyList::empty(py);
        for r in &self.trace.records {
            let d = PyDict::new(py);
            d.set_item("epoch", r.epoch)?;
            d.set_item("data_passes", r.data_passes)?;
            d.set_item("component_evals", r.component_evals)?;
            d.set_item("subopt", r.subopt)?;
            d.set_item("gap", r.gap)?;
            d.set_item("wall_ms", r.wall_ms)?;
            d.set_item("objective", r.objective)?;
            d.set_item("alt_subopt", r.alt_subopt)?;
            out.append(d)?;
        }
        Ok(out)
    }

    /// Coefficients of the reported point (averaged for methods that average).
    fn beta(&self) -> Vec<f64> {
        reported_iterate(&self.trace).beta.clone()
    }

    fn final_lambda(&self) -> f64 {
        reported_iterate(&self.trace).lambda
    }

    /// First checkpoint (in data passes) with suboptimality at most `threshold`.
    fn passes_to(&self, threshold: f64) -> Option<f64> {
        self.trace.passes_to(threshold)
    }

    fn final_subopt(&self) -> f64 {
        self.trace.last().subopt
    }

    fn __repr__(&self) -> String {
        let last = self.trace.last();
        format!(
            "Trace(algo={}, passes={}, subopt={:e})",
            self.trace.algo, last.data_passes, last.subopt
        )
    }
}

/// Certified reference solution, cached under `DRSL_CACHE_DIR`.
#[pyfunction]
#[pyo3(signature = (dataset, delta=0.1, kappa=1.0, link="canonical-logistic", tol=1e-10, budget=20_000))]
fn reference<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    delta: f64,
    kappa: f64,
    link: &str,
    tol: f64,
    budget: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = params(delta, kappa, link)?;
    let opts = ReferenceOptions {
        budget,
        tol_target: tol,
    };
    let (r, _) = py
        .detach(|| reference_cached(&ReferenceCache::from_env(), &dataset.inner, &p, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("f_star", r.f_star)?;
    d.set_item("tolerance", r.tolerance)?;
    d.set_item("converged", r.converged)?;
    d.set_item("lambda_star", r.lambda_star)?;
    d.set_item("beta_star", r.beta_star)?;
    Ok(d)
}

fn execute(py: Python<'_>, cfg: ExperimentConfig, ds: &drsl_core::Dataset) -> PyResult<Trace> {
    py.detach(|| {
        let (reference, _) = reference_cached(&ReferenceCache::from_env(), ds, &cfg.params, &cfg.reference)?;
        let trace = run_solver(&cfg, ds, &reference)?;
        Ok(Trace { trace, reference })
    })
    .map_err(to_py)
}

/// Runs `algo` on `dataset`. Keyword arguments are config keys
/// (`delta`, `eta`, `batch`, `max_passes`, ...).
#[pyfunction]
#[pyo3(signature = (dataset, algo, **options))]
fn solve(py: Python<'_>, dataset: &Dataset, algo: &str, options: Option<&Bound<'_, PyDict>>) -> PyResult<Trace> {
    let mut map = ConfigMap::default();
    map.set("algo", algo).map_err(to_py)?;
    if let Some(options) = options {
        for (k, v) in options.iter() {
            let key: String = k.extract()?;
            if matches!(key.as_str(), "path" | "n" | "d" | "noise_var" | "data_seed") {
                return Err(PyValueError::new_err(format!(
                    "`{key}` selects a dataset; pass a Dataset instead"
                )));
            }
            map.set(&key, &v.str()?.to_cow()?).map_err(to_py)?;
        }
    }
    let cfg = ExperimentConfig::from_map(&map).map_err(to_py)?;
    execute(py, cfg, &dataset.inner)
}

/// Runs a config file, with `--key value` style overrides.
#[pyfunction]
#[pyo3(signature = (path, overrides=Vec::new()))]
fn run_config(py: Python<'_>, path: PathBuf, overrides: Vec<String>) -> PyResult<Trace> {
    let cfg = ExperimentConfig::load(&path, &overrides).map_err(to_py)?;
    let ds = py.detach(|| cfg.dataset.load()).map_err(to_py)?;
    execute(py, cfg, &ds)
}

/// Wasserstein robust loss at radius `delta`; returns `(value, argmin_lambda)`.
#[pyfunction]
#[pyo3(signature = (beta, dataset, delta, kappa=1.0, link="canonical-logistic"))]
fn robust_loss(beta: Vec<f64>, dataset: &Dataset, delta: f64, kappa: f64, link: &str) -> PyResult<(f64, f64)> {
    let p = params(delta, kappa, link)?;
    let r = robust_loss_w(&beta, &dataset.inner, delta, &p).map_err(to_py)?;
    Ok((r.value, r.argmin_lambda))
}

/// `(error_rate, mean_loss)` of `beta` on `dataset`.
#[pyfunction]
#[pyo3(signature = (beta, dataset, link="canonical-logistic"))]
fn metrics(beta: Vec<f64>, dataset: &Dataset, link: &str) -> PyResult<(f64, f64)> {
    let p = params(0.0, 1.0, link)?;
    test_metrics(&beta, &dataset.inner, &p).map_err(to_py)
}

#[pymodule]
fn drsl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(reference, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(robust_loss, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    Ok(())
}
