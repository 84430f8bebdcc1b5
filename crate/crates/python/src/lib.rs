//! Python bindings: spin models and chains, estimators, tail bounds and the
//! experiment harness.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mcmc::bounds::{self, Formula};
use mcmc::chain::run_chain;
use mcmc::dag::{self, BinaryDataset, BmaConfig};
use mcmc::estimators;
use mcmc::harness::{self, emit_outputs};
use mcmc::rng::{chain_rng, initial_state_seed};
use mcmc::spin::{self, Family, SpinConfig, SpinKernel, UpdateScheme};
use mcmc::Error;

create_exception!(
    mcmc_ci,
    EstimationFailure,
    PyRuntimeError,
    "Estimated asymptotic variance is not positive."
);
create_exception!(
    mcmc_ci,
    Infeasible,
    PyValueError,
    "Requested confidence level cannot be reached."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::EstimationFailure(_) => EstimationFailure::new_err(e.to_string()),
        Error::Infeasible(_) => Infeasible::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for mcmc::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn family(name: &str) -> PyResult<Family> {
    match name {
        "curie_weiss" => Ok(Family::CurieWeiss),
        "ising_1d" => Ok(Family::Ising1D),
        "ising_2d" => Ok(Family::Ising2D),
        _ => Err(PyValueError::new_err(format!("unknown model {name:?}"))),
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::CurieWeiss => "curie_weiss",
        Family::Ising1D => "ising_1d",
        Family::Ising2D => "ising_2d",
    }
}

fn scheme(name: &str) -> PyResult<UpdateScheme> {
    match name {
        "glauber_random_scan" => Ok(UpdateScheme::GlauberRandomScan),
        "glauber_systematic_scan" => Ok(UpdateScheme::GlauberSystematicScan),
        "metropolis" => Ok(UpdateScheme::MetropolisSpinFlip),
        _ => Err(PyValueError::new_err(format!("unknown kernel {name:?}"))),
    }
}

fn spins(values: Vec<i8>) -> PyResult<SpinConfig> {
    SpinConfig::new(values).py()
}

/// Curie-Weiss or periodic Ising model.
#[pyclass(name = "SpinModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpinModel {
    inner: spin::SpinModel,
}

#[pymethods]
impl PySpinModel {
    /// `family` is one of curie_weiss, ising_1d, ising_2d (perfect-square `n_sites`).
    #[new]
    #[pyo3(signature = (family_name, n_sites, beta, h = 0.0))]
    fn new(family_name: &str, n_sites: usize, beta: f64, h: f64) -> PyResult<Self> {
        let inner = spin::SpinModel::new(family(family_name)?, n_sites, beta, h).py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn family(&self) -> &'static str {
        family_name(self.inner.family())
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.inner.n_sites()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn neighbors(&self, site: usize) -> PyResult<Vec<usize>> {
        if site >= self.inner.n_sites() {
            return Err(PyValueError::new_err(format!("site {site} out of range")));
        }
        Ok(self.inner.neighbors(site).to_vec())
    }

    fn energy(&self, configuration: Vec<i8>) -> PyResult<f64> {
        self.inner.energy(&spins(configuration)?).py()
    }

    fn local_field(&self, configuration: Vec<i8>, site: usize) -> PyResult<f64> {
        self.inner.local_field(&spins(configuration)?, site).py()
    }

    fn conditional_plus_probability(&self, configuration: Vec<i8>, site: usize) -> PyResult<f64> {
        self.inner
            .conditional_plus_probability(&spins(configuration)?, site)
            .py()
    }

    /// Exact one-step law from `configuration` as `(state index, probability)`
    /// pairs; state indices follow bit `i` = spin `i` is +1.
    fn transitions(&self, kernel: &str, configuration: Vec<i8>) -> PyResult<Vec<(usize, f64)>> {
        let k = SpinKernel::new(self.inner.clone(), scheme(kernel)?);
        k.transitions(&spins(configuration)?).py()
    }

    /// Observable trace `f(X_1), …, f(X_n)` of one seeded chain. Without
    /// `initial` the start is uniform, drawn from a stream derived from `seed`.
    #[pyo3(signature = (kernel, n, seed, observable = "magnetization", initial = None))]
    fn run(
        &self,
        py: Python<'_>,
        kernel: &str,
        n: usize,
        seed: u64,
        observable: &str,
        initial: Option<Vec<i8>>,
    ) -> PyResult<Vec<f64>> {
        let k = SpinKernel::new(self.inner.clone(), scheme(kernel)?);
        let start = match initial {
            Some(v) => spins(v)?,
            None => SpinConfig::uniform(self.inner.n_sites(), &mut chain_rng(initial_state_seed(seed))),
        };
        let f: fn(&SpinConfig) -> f64 = match observable {
            "magnetization" => |w| w.magnetization() as f64,
            "sign_magnetization" => |w| w.sign_magnetization() as f64,
            _ => return Err(PyValueError::new_err(format!("unknown observable {observable:?}"))),
        };
        let trace = py.detach(|| run_chain(&k, start, f, n, seed)).py()?;
        Ok(trace.into_values())
    }

    fn __repr__(&self) -> String {
        format!(
            "SpinModel({:?}, n_sites={}, beta={}, h={})",
            self.family(),
            self.inner.n_sites(),
            self.inner.beta(),
            self.inner.h()
        )
    }
}

/// Estimates for one observable of one run.
#[pyclass(name = "EstimatorReport", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEstimatorReport {
    inner: estimators::EstimatorReport,
}

#[pymethods]
impl PyEstimatorReport {
    /// Estimate from a trace. `t0` and `k` default to `N/10` and `10 ⌊N^{1/3}⌋`.
    #[staticmethod]
    #[pyo3(signature = (values, reversible = true, c = 1.0, t0 = None, k = None))]
    fn from_values(values: Vec<f64>, reversible: bool, c: f64, t0: Option<usize>, k: Option<usize>) -> PyResult<Self> {
        let window = match (t0, k) {
            (None, None) => None,
            (t0, k) => {
                let (d_t0, d_k) = estimators::default_policy(values.len()).py()?;
                Some((t0.unwrap_or(d_t0), k.unwrap_or(d_k)))
            }
        };
        let inner = estimators::EstimatorReport::from_values(&values, reversible, c, window).py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn parse_record(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: estimators::EstimatorReport::parse_record(text).py()?,
        })
    }

    fn to_record(&self) -> String {
        self.inner.to_record()
    }

    #[getter]
    fn v_hat(&self) -> f64 {
        self.inner.v_hat
    }

    #[getter]
    fn sigma2_hat(&self) -> f64 {
        self.inner.sigma2_hat
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn n_hat(&self) -> usize {
        self.inner.n_hat
    }

    #[getter]
    fn t0_hat(&self) -> usize {
        self.inner.t0_hat
    }

    #[getter]
    fn gamma_hat(&self) -> f64 {
        self.inner.gamma_hat
    }

    #[getter]
    fn tmix_hat(&self) -> f64 {
        self.inner.tmix_hat
    }

    #[getter]
    fn reversible(&self) -> bool {
        self.inner.reversible
    }

    #[getter]
    fn c_bound(&self) -> f64 {
        self.inner.c_bound
    }

    fn __repr__(&self) -> String {
        let r = &self.inner;
        format!(
            "EstimatorReport(v_hat={}, sigma2_hat={}, gamma_hat={}, tmix_hat={}, t0_hat={}, k={})",
            r.v_hat, r.sigma2_hat, r.gamma_hat, r.tmix_hat, r.t0_hat, r.k
        )
    }
}

#[pyfunction]
fn default_policy(n_hat: usize) -> PyResult<(usize, usize)> {
    estimators::default_policy(n_hat).py()
}

#[pyfunction]
fn variance_hat(values: Vec<f64>, t0: usize) -> PyResult<f64> {
    estimators::variance_hat(&values, t0).py()
}

#[pyfunction]
fn autocov_hat(values: Vec<f64>, t0: usize, k: usize, lag: usize) -> PyResult<f64> {
    estimators::autocov_hat(&values, t0, k, lag).py()
}

#[pyfunction]
fn sigma2_hat(values: Vec<f64>, t0: usize, k: usize) -> PyResult<f64> {
    estimators::sigma2_hat(&values, t0, k).py()
}

/// Gap from `(V, sigma2)` pairs, minimum over observables.
#[pyfunction]
#[pyo3(signature = (pairs, reversible = true))]
fn gamma_hat(pairs: Vec<(f64, f64)>, reversible: bool) -> PyResult<f64> {
    estimators::gamma_hat(&pairs, reversible).py()
}

#[pyfunction]
#[pyo3(signature = (gamma, reversible = true))]
fn tmix_hat(gamma: f64, reversible: bool) -> PyResult<f64> {
    estimators::tmix_hat(gamma, reversible).py()
}

/// Inputs of the Chebyshev and Bernstein tail bounds.
#[pyclass(name = "BoundInputs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBoundInputs {
    inner: bounds::BoundInputs,
}

#[pymethods]
impl PyBoundInputs {
    /// `e_t0` defaults to the uniform burn-in term `2^-floor(t0/tmix)`.
    #[new]
    #[pyo3(signature = (v_f, sigma2, gamma, tmix, c, n, t0, e_t0 = None, reversible = true, n_chains = 1))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        v_f: f64,
        sigma2: f64,
        gamma: f64,
        tmix: f64,
        c: f64,
        n: usize,
        t0: usize,
        e_t0: Option<f64>,
        reversible: bool,
        n_chains: usize,
    ) -> PyResult<Self> {
        let e_t0 = match e_t0 {
            Some(e) => e,
            None => bounds::e_t0_uniform(t0, tmix).py()?,
        };
        let inner = bounds::BoundInputs {
            v_f,
            sigma2,
            gamma,
            tmix,
            c,
            n,
            t0,
            e_t0,
            reversible,
            n_chains,
        };
        inner.validate().py()?;
        Ok(Self { inner })
    }

    #[getter]
    fn e_t0(&self) -> f64 {
        self.inner.e_t0
    }

    #[getter]
    fn t0(&self) -> usize {
        self.inner.t0
    }

    fn chebyshev_tail(&self, t: f64) -> PyResult<f64> {
        bounds::chebyshev_tail(&self.inner, t).py()
    }

    fn bernstein_tail(&self, t: f64) -> PyResult<f64> {
        bounds::bernstein_tail(&self.inner, t).py()
    }

    fn bernstein_one_sided_tail(&self, t: f64) -> PyResult<f64> {
        bounds::bernstein_one_sided_tail(&self.inner, t).py()
    }

    /// Natural log of the uncapped Bernstein bound; finite where the bound underflows.
    fn bernstein_log_tail(&self, t: f64) -> PyResult<f64> {
        bounds::bernstein_log_tail_uncapped(&self.inner, t).py()
    }

    /// CLT approximation `ln(1 - Phi(t sqrt(N - t0) / sigma))`, not a bound.
    fn normal_log_tail(&self, t: f64) -> PyResult<f64> {
        bounds::normal_log_tail(self.inner.sigma2, self.inner.n, self.inner.t0, t).py()
    }

    /// Smallest `t` whose Bernstein bound is at most `delta`.
    fn invert_bernstein(&self, delta: f64) -> PyResult<f64> {
        bounds::invert_bernstein(&self.inner, delta).py()
    }

    /// `ln min(1, bound)` of `formula` at each `|t|` in `grid`.
    fn curve(&self, formula: &str, grid: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = Formula::from_name(formula).py()?;
        Ok(bounds::tail_curve(&self.inner, f, &grid).py()?.log_probabilities)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyfunction]
fn e_t0_uniform(t0: usize, tmix: f64) -> PyResult<f64> {
    bounds::e_t0_uniform(t0, tmix).py()
}

/// `(gap, t_mix)` of random-scan Glauber on Curie-Weiss at high temperature.
#[pyfunction]
fn analytic_cw_glauber(n_sites: usize, beta: f64) -> PyResult<(f64, f64)> {
    bounds::analytic_cw_glauber(n_sites, beta).py()
}

#[pyfunction]
fn analytic_ising1d<'py>(py: Python<'py>, n_sites: usize, beta: f64) -> PyResult<Bound<'py, PyDict>> {
    let g = bounds::analytic_ising1d(n_sites, beta).py()?;
    let d = PyDict::new(py);
    d.set_item("gamma_random_scan", g.gamma_random_scan)?;
    d.set_item("tmix_random_scan", g.tmix_random_scan)?;
    d.set_item("gamma_ps_systematic", g.gamma_ps_systematic)?;
    d.set_item("tmix_systematic", g.tmix_systematic)?;
    Ok(d)
}

/// Parsed experiment config (`key = value` lines).
#[pyclass(name = "ExperimentConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyExperimentConfig {
    inner: harness::ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: harness::ExperimentConfig::parse(text).py()?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: harness::ExperimentConfig::load(path).py()?,
        })
    }

    #[getter]
    fn get_n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn get_runs(&self) -> usize {
        self.inner.runs
    }

    #[setter]
    fn set_runs(&mut self, runs: usize) -> PyResult<()> {
        if runs == 0 {
            return Err(PyValueError::new_err("runs must be positive"));
        }
        self.inner.runs = runs;
        Ok(())
    }

    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.base_seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.base_seed = seed;
    }

    fn canonical(&self) -> String {
        self.inner.canonical()
    }

    /// SHA-256 of the canonical text.
    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn __repr__(&self) -> String {
        format!("ExperimentConfig(sha256={})", self.inner.hash())
    }
}

fn params_dict<'py>(py: Python<'py>, p: &harness::ResolvedParameters) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("gamma", p.gamma)?;
    d.set_item("tmix", p.tmix)?;
    d.set_item("sigma2", p.sigma2)?;
    d.set_item("v_f", p.v_f)?;
    d.set_item("c", p.c)?;
    d.set_item("n", p.n)?;
    d.set_item("t0", p.t0)?;
    d.set_item("e_t0", p.e_t0)?;
    d.set_item("runs", p.runs)?;
    d.set_item("reversible", p.reversible)?;
    Ok(d)
}

#[pyfunction]
fn run_estimation(py: Python<'_>, config: &PyExperimentConfig) -> PyResult<PyEstimatorReport> {
    let cfg = config.inner.clone();
    let inner = py.detach(|| harness::run_estimation(&cfg)).py()?;
    Ok(PyEstimatorReport { inner })
}

/// Run the full experiment. Returns run averages, the empirical log-tail and
/// the bound curves; with `out` the three output files are written there too.
#[pyfunction]
#[pyo3(signature = (config, out = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &PyExperimentConfig,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let summary = py
        .detach(|| -> mcmc::Result<_> {
            let s = harness::run_experiment(&cfg)?;
            if let Some(dir) = &out {
                emit_outputs(&s, &cfg, dir)?;
            }
            Ok(s)
        })
        .py()?;
    let d = PyDict::new(py);
    d.set_item("observable", &summary.observable)?;
    d.set_item("estimates", &summary.estimates)?;
    d.set_item("grid", &summary.grid)?;
    d.set_item("pooled_mean", summary.tail.pooled_mean)?;
    d.set_item("counts", &summary.tail.counts)?;
    d.set_item("l_hat", &summary.tail.l_hat)?;
    let curves = PyDict::new(py);
    for c in &summary.curves {
        curves.set_item(c.formula_id, &c.log_probabilities)?;
    }
    d.set_item("curves", curves)?;
    d.set_item("params", params_dict(py, &summary.params)?)?;
    if let Some(r) = &summary.report {
        d.set_item("report", PyEstimatorReport { inner: r.clone() })?;
    }
    Ok(d)
}

#[pyfunction]
fn run_dag_posterior<'py>(py: Python<'py>, config: &PyExperimentConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let post = py.detach(|| harness::run_dag_posterior(&cfg)).py()?;
    let d = PyDict::new(py);
    d.set_item("observable", &post.observable)?;
    d.set_item("estimate", post.estimate)?;
    d.set_item("half_width", post.half_width)?;
    d.set_item("delta", post.delta)?;
    d.set_item("exact", post.exact)?;
    d.set_item("params", params_dict(py, &post.params)?)?;
    d.set_item("report", PyEstimatorReport { inner: post.report })?;
    Ok(d)
}

/// Synthetic six-column 0/1 dataset from a fixed generating network.
#[pyfunction]
fn generate_dataset(rows: usize, seed: u64) -> Vec<Vec<u8>> {
    dag::generate_dataset(rows, &mut chain_rng(seed)).rows().to_vec()
}

/// Exact posterior probability of the edge `source -> target` (0-based) by
/// enumerating every DAG; at most 4 columns.
#[pyfunction]
#[pyo3(signature = (rows, source, target, equivalent_sample_size = 4.0))]
fn exact_edge_probability(
    rows: Vec<Vec<u8>>,
    source: usize,
    target: usize,
    equivalent_sample_size: f64,
) -> PyResult<f64> {
    let n = rows.first().map_or(0, Vec::len);
    let data = BinaryDataset::new(n, rows).py()?;
    let edge = dag::edge_indicator(source, target).py()?;
    if source >= n || target >= n {
        return Err(PyValueError::new_err(format!(
            "edge ({source}, {target}) out of range for {n} columns"
        )));
    }
    let post = dag::exact_posterior(&data, &BmaConfig::new(equivalent_sample_size).py()?).py()?;
    Ok(post.iter().map(|(g, p)| edge.eval(g) * p).sum())
}

#[pymodule]
fn mcmc_ci(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EstimationFailure", m.py().get_type::<EstimationFailure>())?;
    m.add("Infeasible", m.py().get_type::<Infeasible>())?;
    m.add_class::<PySpinModel>()?;
    m.add_class::<PyEstimatorReport>()?;
    m.add_class::<PyBoundInputs>()?;
    m.add_class::<PyExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(default_policy, m)?)?;
    m.add_function(wrap_pyfunction!(variance_hat, m)?)?;
    m.add_function(wrap_pyfunction!(autocov_hat, m)?)?;
    m.add_function(wrap_pyfunction!(sigma2_hat, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_hat, m)?)?;
    m.add_function(wrap_pyfunction!(tmix_hat, m)?)?;
    m.add_function(wrap_pyfunction!(e_t0_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_cw_glauber, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_ising1d, m)?)?;
    m.add_function(wrap_pyfunction!(run_estimation, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_dag_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(exact_edge_probability, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
