//! Python bindings: `import maxbern`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use maxbern_core::synthesis::TailCount;
use maxbern_core::{bounds, montecarlo, oracle, processes, synthesis, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Synthesis { .. } | Error::Convergence(_) | Error::Fit(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Canonical bound `A exp(-a t^2 / (n + b t^gamma))`.
#[pyclass(name = "BernsteinParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyParams(maxbern_core::BernsteinParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (A, a, b, gamma))]
    #[allow(non_snake_case)]
    fn new(A: f64, a: f64, b: f64, gamma: f64) -> PyResult<Self> {
        maxbern_core::BernsteinParams::new(A, a, b, gamma).map(PyParams).map_err(to_py)
    }

    /// From `v`, `kappa` of `2 exp(-t^2 / (2 (n v + kappa t)))`.
    #[staticmethod]
    fn classic(v: f64, kappa: f64) -> PyResult<Self> {
        let p = maxbern_core::ClassicParams::new(v, kappa).map_err(to_py)?;
        Ok(PyParams(bounds::classic_to_canonical(&p)))
    }

    #[getter(A)]
    fn scale(&self) -> f64 {
        self.0.scale
    }
    #[getter]
    fn a(&self) -> f64 {
        self.0.rate
    }
    #[getter]
    fn b(&self) -> f64 {
        self.0.growth
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }

    fn __call__(&self, n: f64, t: f64) -> PyResult<f64> {
        bounds::eval_generalized(&self.0, n, t).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!("BernsteinParams(A={}, a={}, b={}, gamma={})", p.scale, p.rate, p.growth, p.gamma)
    }
}

#[pyclass(name = "Certificate", frozen, from_py_object)]
#[derive(Clone)]
struct PyCertificate(maxbern_core::MaximalCertificate);

#[pymethods]
impl PyCertificate {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        maxbern_core::MaximalCertificate::from_json(text)
            .map(PyCertificate)
            .map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams(self.0.params)
    }
    #[getter]
    fn c(&self) -> f64 {
        self.0.c
    }
    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }
    #[getter]
    fn q(&self) -> f64 {
        self.0.q
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }
    #[getter]
    fn c1(&self) -> f64 {
        self.0.c1
    }
    #[getter]
    fn c2(&self) -> f64 {
        self.0.c2
    }
    #[getter]
    fn c3(&self) -> f64 {
        self.0.c3
    }
    #[getter]
    fn n0(&self) -> u64 {
        self.0.n0
    }
    /// `ln C`; `C` itself may exceed the float range.
    #[getter(ln_C)]
    fn ln_prefactor(&self) -> f64 {
        self.0.ln_prefactor()
    }

    fn ln_bound(&self, n: f64, t: f64) -> f64 {
        self.0.ln_bound(n, t)
    }

    fn bound(&self, n: f64, t: f64) -> f64 {
        self.0.bound(n, t)
    }

    fn __repr__(&self) -> String {
        format!("Certificate(c={}, n0={}, ln_C={})", self.0.c, self.0.n0, self.0.ln_prefactor())
    }
}

#[pyclass(name = "CheckReport", frozen)]
struct PyCheckReport(maxbern_core::CheckReport);

#[pymethods]
impl PyCheckReport {
    #[getter]
    fn all_pass(&self) -> bool {
        self.0.all_pass
    }
    #[getter]
    fn worst_margin(&self) -> f64 {
        self.0.worst_margin
    }
    #[getter]
    fn induction_range(&self) -> Option<(u64, u64)> {
        self.0.induction_range
    }
    /// `(n, t, region, margin, pass)` per cell.
    #[getter]
    fn cells(&self) -> Vec<(u64, f64, &'static str, f64, bool)> {
        self.0
            .cells
            .iter()
            .map(|c| (c.n, c.t, c.region.as_str(), c.margin, c.pass))
            .collect()
    }
    fn __len__(&self) -> usize {
        self.0.cells.len()
    }
}

#[pyclass(name = "TailEstimate", frozen, get_all)]
struct PyTailEstimate {
    n: u64,
    t: f64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    reps: u64,
    hits: u64,
    level: f64,
}

#[pymethods]
impl PyTailEstimate {
    fn __repr__(&self) -> String {
        format!(
            "TailEstimate(n={}, t={}, p_hat={}, ci=({}, {}))",
            self.n, self.t, self.p_hat, self.ci_low, self.ci_high
        )
    }
}

impl From<montecarlo::TailEstimate> for PyTailEstimate {
    fn from(e: montecarlo::TailEstimate) -> Self {
        PyTailEstimate {
            n: e.n,
            t: e.t,
            p_hat: e.p_hat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            reps: e.reps,
            hits: e.hits,
            level: e.level,
        }
    }
}

fn spec(text: &str) -> PyResult<maxbern_core::ProcessSpec> {
    maxbern_core::ProcessSpec::parse(text).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (params, c, epsilon = synthesis::DEFAULT_EPSILON, n0_ceiling = synthesis::DEFAULT_N0_CEILING))]
fn synthesize(params: &PyParams, c: f64, epsilon: f64, n0_ceiling: u64) -> PyResult<PyCertificate> {
    let config = synthesis::SynthesisConfig { epsilon, n0_ceiling };
    synthesis::synthesize_with(&params.0, c, &config)
        .map(PyCertificate)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (cert, n_max, grid = 64, summands = false))]
fn check_certificate(cert: &PyCertificate, n_max: u64, grid: usize, summands: bool) -> PyCheckReport {
    let tail = if summands { TailCount::Summands } else { TailCount::Printed };
    PyCheckReport(synthesis::check_certificate_with(&cert.0, n_max, grid, tail))
}

#[pyfunction]
#[pyo3(signature = (spec_text, n, ts, reps, seed = 0, level = montecarlo::DEFAULT_LEVEL))]
fn estimate_max_tail(
    py: Python<'_>,
    spec_text: &str,
    n: u64,
    ts: Vec<f64>,
    reps: u64,
    seed: u64,
    level: f64,
) -> PyResult<Vec<PyTailEstimate>> {
    let s = spec(spec_text)?;
    let out = py.detach(|| montecarlo::estimate_max_tail_at(&s, n, &ts, reps, seed, level));
    Ok(out.map_err(to_py)?.into_iter().map(PyTailEstimate::from).collect())
}

/// Exact `P(max_k |S_k| > t)`.
#[pyfunction]
fn exact_max_tail(spec_text: &str, n: u64, t: f64) -> PyResult<f64> {
    oracle::exact_max_tail_dp(&spec(spec_text)?, n, t)
        .map(|e| e.prob)
        .map_err(to_py)
}

/// `(rep, stat, onesided_stat, y_value)`.
type LilRow = (u64, f64, f64, Option<u8>);

/// One row per replication.
#[pyfunction]
#[pyo3(signature = (spec_text, n_max, lambda_, reps, seed = 0))]
fn lil_run(
    py: Python<'_>,
    spec_text: &str,
    n_max: u64,
    lambda_: f64,
    reps: u64,
    seed: u64,
) -> PyResult<Vec<LilRow>> {
    let s = spec(spec_text)?;
    let res = py
        .detach(|| montecarlo::lil_run(&s, n_max, lambda_, reps, seed))
        .map_err(to_py)?;
    Ok(res
        .paths
        .iter()
        .map(|p| (p.rep, p.stat, p.onesided_stat, p.y_value))
        .collect())
}

/// Row-major increments, one list per path.
#[pyfunction]
#[pyo3(signature = (spec_text, n, reps, seed = 0))]
fn generate(spec_text: &str, n: usize, reps: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let batch = processes::generate(&spec(spec_text)?, n, reps, seed).map_err(to_py)?;
    Ok((0..batch.reps).map(|r| batch.path(r).to_vec()).collect())
}

#[pyfunction]
fn compute_d1(m: f64, eta: f64) -> PyResult<f64> {
    bounds::compute_d1(m, eta).map_err(to_py)
}

#[pymodule]
fn maxbern(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyCertificate>()?;
    m.add_class::<PyCheckReport>()?;
    m.add_class::<PyTailEstimate>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(check_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_max_tail, m)?)?;
    m.add_function(wrap_pyfunction!(exact_max_tail, m)?)?;
    m.add_function(wrap_pyfunction!(lil_run, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_d1, m)?)?;
    Ok(())
}
