//! Python bindings for `robustq`.
//!
//! Import as `robustq_py`. Arrays cross the boundary as flat Python lists in
//! row-major order; pairs are indexed `state * num_actions + action`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use robustq::agents::{AgentSpec, Init, RhoMode, RhoSchedule, Variant};
use robustq::analysis::{build_asymptotic_model, lyapunov_amse as solve_amse, watkins_amse};
use robustq::environments::{build_baird, build_random_env, BairdSpec, RandomEnvSpec};
use robustq::harness::{self, load_config};
use robustq::mdp::{greedy_policy, solve_optimal_q, stationary_distribution};
use robustq::rng::{stream, StreamRng};
use robustq::simulate::Trajectory;
use robustq::{Error, FeatureMap, Policy, TabularMdp, Transition};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Parse(_) | Error::Validation(_) | Error::UnknownKey(_) => {
            PyValueError::new_err(err.to_string())
        }
        Error::Io(_) | Error::NotConverged { .. } | Error::SingularSystem(_) => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_rho_mode(name: &str) -> PyResult<RhoMode> {
    match name {
        "linear" => Ok(RhoMode::Linear),
        "quadratic" => Ok(RhoMode::Quadratic),
        "constant" => Ok(RhoMode::Constant),
        other => Err(PyValueError::new_err(format!("unknown rho mode `{other}`"))),
    }
}

/// Finite MDP with a row-major `(S·A) × S` kernel.
#[pyclass(name = "Mdp", module = "robustq_py", from_py_object)]
#[derive(Clone)]
struct PyMdp {
    inner: TabularMdp,
}

#[pymethods]
impl PyMdp {
    #[new]
    #[pyo3(signature = (num_states, num_actions, kernel, reward, discount, initial_dist=None))]
    fn new(
        num_states: usize,
        num_actions: usize,
        kernel: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial_dist: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let init = initial_dist.unwrap_or_else(|| vec![1.0 / num_states.max(1) as f64; num_states]);
        TabularMdp::new(num_states, num_actions, kernel, reward, discount, init)
            .map(|inner| PyMdp { inner })
            .map_err(to_py)
    }

    /// Baird's example together with its feature map.
    #[staticmethod]
    #[pyo3(signature = (seed=0, discount=0.8))]
    fn baird(seed: u64, discount: f64) -> PyResult<(PyMdp, PyFeatures)> {
        let spec = BairdSpec {
            seed,
            discount,
            ..BairdSpec::default()
        };
        let (mdp, features) = build_baird(&spec).map_err(to_py)?;
        Ok((PyMdp { inner: mdp }, PyFeatures { inner: features }))
    }

    /// Random Dirichlet MDP.
    #[staticmethod]
    #[pyo3(signature = (num_states=10, num_actions=3, seed=0, discount=0.9, dirichlet_alpha=0.1))]
    fn random(
        num_states: usize,
        num_actions: usize,
        seed: u64,
        discount: f64,
        dirichlet_alpha: f64,
    ) -> PyResult<Self> {
        let spec = RandomEnvSpec {
            num_states,
            num_actions,
            seed,
            discount,
            dirichlet_alpha,
            ..RandomEnvSpec::default()
        };
        build_random_env(&spec)
            .map(|inner| PyMdp { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        TabularMdp::from_json(text)
            .map(|inner| PyMdp { inner })
            .map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn discount(&self) -> f64 {
        self.inner.discount()
    }

    #[getter]
    fn rewards(&self) -> Vec<f64> {
        self.inner.rewards().to_vec()
    }

    #[getter]
    fn kernel(&self) -> Vec<f64> {
        self.inner.kernel().to_vec()
    }

    /// Optimal action values by value iteration.
    #[pyo3(signature = (tol=1e-12))]
    fn solve_q(&self, tol: f64) -> Vec<f64> {
        solve_optimal_q(&self.inner, tol)
    }

    /// Greedy action per state under the optimal action values.
    #[pyo3(signature = (tol=1e-12))]
    fn greedy_actions(&self, tol: f64) -> PyResult<Vec<usize>> {
        let q = solve_optimal_q(&self.inner, tol);
        let pi =
            greedy_policy(&q, self.inner.num_states(), self.inner.num_actions()).map_err(to_py)?;
        Ok((0..self.inner.num_states())
            .map(|s| pi.action(s).unwrap_or(0))
            .collect())
    }

    /// Stationary state-action distribution under a uniform behaviour policy.
    #[pyo3(signature = (tol=1e-13))]
    fn stationary_distribution(&self, tol: f64) -> PyResult<Vec<f64>> {
        let behavior = Policy::uniform(self.inner.num_states(), self.inner.num_actions());
        stationary_distribution(&self.inner, &behavior, tol).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mdp(num_states={}, num_actions={}, discount={})",
            self.inner.num_states(),
            self.inner.num_actions(),
            self.inner.discount()
        )
    }
}

/// Linear feature map `φ: pairs → R^d`.
#[pyclass(name = "Features", module = "robustq_py", from_py_object)]
#[derive(Clone)]
struct PyFeatures {
    inner: FeatureMap,
}

#[pymethods]
impl PyFeatures {
    /// From a row-major `d × (S·A)` matrix.
    #[new]
    fn new(dim: usize, num_pairs: usize, matrix: Vec<f64>) -> PyResult<Self> {
        FeatureMap::from_row_major(dim, num_pairs, matrix)
            .map(|inner| PyFeatures { inner })
            .map_err(to_py)
    }

    /// One-hot (tabular) features.
    #[staticmethod]
    fn canonical(num_states: usize, num_actions: usize) -> Self {
        PyFeatures {
            inner: FeatureMap::canonical(num_states, num_actions),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_pairs(&self) -> usize {
        self.inner.num_pairs()
    }

    fn is_canonical(&self) -> bool {
        self.inner.is_canonical()
    }

    fn column(&self, pair: usize) -> PyResult<Vec<f64>> {
        self.check_pair(pair)?;
        Ok(self.inner.column(pair))
    }

    /// `φ(x)ᵀθ` for every pair.
    fn values(&self, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.check_theta(&theta).map_err(to_py)?;
        Ok(self.inner.values(&theta))
    }

    fn to_row_major(&self) -> Vec<f64> {
        self.inner.to_row_major()
    }
}

impl PyFeatures {
    fn check_pair(&self, pair: usize) -> PyResult<()> {
        if pair >= self.inner.num_pairs() {
            return Err(PyValueError::new_err(format!(
                "pair {pair} out of range (num_pairs {})",
                self.inner.num_pairs()
            )));
        }
        Ok(())
    }
}

/// A learning agent bound to a feature map, with its own selector stream.
#[pyclass(name = "Agent", module = "robustq_py")]
struct PyAgent {
    inner: robustq::agents::Agent,
    features: FeatureMap,
    rng: StreamRng,
}

#[pymethods]
impl PyAgent {
    #[new]
    #[pyo3(signature = (
        variant, features, num_actions, gamma, copies=1, alpha0=0.1, w_alpha=1e3,
        rho0=0.0, w_rho=1.0, rho_mode="linear", init_low=0.0, init_high=0.0, seed=0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        variant: &str,
        features: &PyFeatures,
        num_actions: usize,
        gamma: f64,
        copies: usize,
        alpha0: f64,
        w_alpha: f64,
        rho0: f64,
        w_rho: f64,
        rho_mode: &str,
        init_low: f64,
        init_high: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let v = Variant::from_name(variant)
            .ok_or_else(|| PyValueError::new_err(format!("unknown variant `{variant}`")))?;
        let init = if init_low == 0.0 && init_high == 0.0 {
            Init::Zero
        } else {
            Init::Uniform {
                low: init_low,
                high: init_high,
            }
        };
        let spec = AgentSpec::new(v, copies, alpha0, w_alpha)
            .with_rho(RhoSchedule::new(rho0, w_rho, parse_rho_mode(rho_mode)?))
            .with_init(init, false);
        let mut init_rng = stream(seed, "init");
        let inner = spec
            .build(features.inner.dim(), num_actions, gamma, &mut init_rng)
            .map_err(to_py)?;
        Ok(PyAgent {
            inner,
            features: features.inner.clone(),
            rng: stream(seed, "agent"),
        })
    }

    /// Restore an agent from [`to_json`] output.
    #[staticmethod]
    #[pyo3(signature = (text, features, seed=0))]
    fn from_json(text: &str, features: &PyFeatures, seed: u64) -> PyResult<Self> {
        let inner = robustq::agents::Agent::from_json(text).map_err(to_py)?;
        Ok(PyAgent {
            inner,
            features: features.inner.clone(),
            rng: stream(seed, "agent"),
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.variant().name()
    }

    #[getter]
    fn copies(&self) -> usize {
        self.inner.copies()
    }

    #[getter]
    fn step_counter(&self) -> u64 {
        self.inner.step_counter()
    }

    fn current_alpha(&self) -> f64 {
        self.inner.current_alpha()
    }

    fn current_rho(&self) -> f64 {
        self.inner.current_rho()
    }

    /// One update on the transition `(s, a, r, s')`.
    fn step(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
    ) -> PyResult<()> {
        let t = Transition::new(state, action, reward, next_state);
        self.inner
            .step(&t, &self.features, &mut self.rng)
            .map_err(to_py)
    }

    /// Train along a uniform-behaviour trajectory of `mdp`.
    #[pyo3(signature = (mdp, steps, seed=0))]
    fn train(&mut self, py: Python<'_>, mdp: &PyMdp, steps: u64, seed: u64) -> PyResult<()> {
        let mdp = &mdp.inner;
        let PyAgent {
            inner,
            features,
            rng,
        } = self;
        py.detach(|| {
            let behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
            let mut env_rng = stream(seed, "env");
            let mut traj = Trajectory::start(mdp, &behavior, &mut env_rng);
            traj.train(inner, features, steps, &mut env_rng, rng)
        })
        .map_err(to_py)
    }

    /// The variant's point estimate.
    fn estimate(&self) -> Vec<f64> {
        self.inner.estimate()
    }

    fn thetas(&self) -> Vec<Vec<f64>> {
        self.inner.thetas().to_vec()
    }

    fn action_values(&self, state: usize) -> Vec<f64> {
        self.inner.action_values(&self.features, state)
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }
}

/// `γ max_a' { φ(s', a')ᵀθ − √ρ ‖φ(s', a')‖ }`.
#[pyfunction]
fn robust_target(
    features: &PyFeatures,
    num_actions: usize,
    next_state: usize,
    theta: Vec<f64>,
    rho: f64,
    gamma: f64,
) -> PyResult<f64> {
    if rho < 0.0 || !rho.is_finite() {
        return Err(PyValueError::new_err("rho must be finite and non-negative"));
    }
    features.inner.check_theta(&theta).map_err(to_py)?;
    if (next_state + 1) * num_actions > features.inner.num_pairs() {
        return Err(PyValueError::new_err("next_state out of range"));
    }
    robustq::agents::robust_target(&features.inner, num_actions, next_state, &theta, rho, gamma)
        .map_err(to_py)
}

/// Analytic AMSE of the averaged linearized recursion at `g = gain_factor · g0`.
#[pyfunction]
#[pyo3(signature = (mdp, features, copies, gain_factor=2.0))]
fn lyapunov_amse<'py>(
    py: Python<'py>,
    mdp: &PyMdp,
    features: &PyFeatures,
    copies: usize,
    gain_factor: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mdp = &mdp.inner;
    let features = &features.inner;
    let (g0, g, predicted, watkins) = py
        .detach(|| -> robustq::Result<_> {
            let behavior = Policy::uniform(mdp.num_states(), mdp.num_actions());
            let g0 = build_asymptotic_model(mdp, &behavior, features, 1.0, 1)?.g0;
            let g = gain_factor * g0;
            let model = build_asymptotic_model(mdp, &behavior, features, g, copies)?;
            let single = build_asymptotic_model(mdp, &behavior, features, g, 1)?;
            Ok((
                g0,
                g,
                solve_amse(&model)?.predicted_trace,
                watkins_amse(&single)?.predicted_trace,
            ))
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("g0", g0)?;
    out.set_item("g", g)?;
    out.set_item("predicted_trace", predicted)?;
    out.set_item("watkins_trace", watkins)?;
    Ok(out)
}

/// Run every (seed, agent) pair of a config file.
#[pyfunction]
#[pyo3(signature = (config_path, parallelism=1, seeds=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_path: &str,
    parallelism: usize,
    seeds: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut config = load_config(config_path).map_err(to_py)?;
    if let Some(n) = seeds {
        config.num_seeds = n;
    }
    let records = py
        .detach(|| harness::run_experiment(&config, parallelism))
        .map_err(to_py)?;
    records
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("seed", r.seed)?;
            d.set_item("agent", r.agent)?;
            d.set_item("metric_name", r.metric_name)?;
            d.set_item("series", r.series)?;
            d.set_item("hit_time", r.hit_time.and_then(|h| h.episodes()))?;
            d.set_item("params_digest", r.params_digest)?;
            d.set_item("config_hash", r.config_hash)?;
            Ok(d)
        })
        .collect()
}

/// Bias reports for the `bias` section of a config file.
#[pyfunction]
fn run_bias<'py>(py: Python<'py>, config_path: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = load_config(config_path).map_err(to_py)?;
    let reports = py.detach(|| harness::run_bias(&config)).map_err(to_py)?;
    reports
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", r.method)?;
            d.set_item("copies", r.copies)?;
            d.set_item("rho", r.rho)?;
            d.set_item("n_snapshot", r.n_snapshot)?;
            d.set_item("bias", r.bias)?;
            d.set_item("se", r.se)?;
            d.set_item("band_hi", r.band_hi)?;
            d.set_item("membership_freq", r.membership_freq)?;
            Ok(d)
        })
        .collect()
}

/// Analytic vs empirical AMSE for the `amse` section of a config file.
#[pyfunction]
fn run_amse<'py>(py: Python<'py>, config_path: &str) -> PyResult<Bound<'py, PyDict>> {
    let config = load_config(config_path).map_err(to_py)?;
    let c = py.detach(|| harness::run_amse(&config)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("copies", c.copies)?;
    d.set_item("g0", c.g0)?;
    d.set_item("g", c.g)?;
    d.set_item("predicted_trace", c.predicted_trace)?;
    d.set_item("watkins_trace", c.watkins_trace)?;
    d.set_item("empirical_trace", c.empirical_trace)?;
    d.set_item("empirical_se", c.empirical_se)?;
    Ok(d)
}

#[pymodule]
fn robustq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMdp>()?;
    m.add_class::<PyFeatures>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(robust_target, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_amse, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_bias, m)?)?;
    m.add_function(wrap_pyfunction!(run_amse, m)?)?;
    m.add(
        "VARIANTS",
        Variant::ALL.iter().map(|v| v.name()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
