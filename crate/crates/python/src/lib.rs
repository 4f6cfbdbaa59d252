//! Python bindings: scenarios, single runs and the reaction and fairness primitives.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use oppsim::kernel::{RngStream, StreamId};
use oppsim::metrics::SummaryReport;
use oppsim::model::{builtin_scenario, validate_scenario, ScenarioConfig, PRESET_NAMES};
use oppsim::reaction;
use oppsim::scenario_file::{parse_scenario, scenario_to_text};
use oppsim::sim::{self, RunOptions, RunOutput};

#[pyclass(name = "Scenario", module = "pyoppsim", from_py_object)]
#[derive(Clone)]
struct Scenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        builtin_scenario(name)
            .map(|cfg| Scenario { cfg })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        parse_scenario(text)
            .map(|cfg| Scenario { cfg })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        PRESET_NAMES.to_vec()
    }

    fn to_text(&self) -> String {
        scenario_to_text(&self.cfg)
    }

    /// `(path, message)` for every violation; empty when valid.
    fn validate(&self) -> Vec<(String, String)> {
        validate_scenario(&self.cfg)
            .into_iter()
            .map(|v| (v.path, v.message))
            .collect()
    }

    #[getter]
    fn name(&self) -> &str {
        &self.cfg.name
    }

    #[getter]
    fn user_count(&self) -> usize {
        self.cfg.user_count
    }

    #[setter]
    fn set_user_count(&mut self, n: usize) {
        self.cfg.user_count = n;
    }

    #[getter]
    fn horizon_s(&self) -> f64 {
        self.cfg.run_horizon
    }

    #[setter]
    fn set_horizon_s(&mut self, h: f64) {
        self.cfg.run_horizon = h;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.master_seed
    }

    #[setter]
    fn set_seed(&mut self, s: u64) {
        self.cfg.master_seed = s;
    }

    #[getter]
    fn single_emergency(&self) -> bool {
        self.cfg.single_emergency
    }

    #[setter]
    fn set_single_emergency(&mut self, on: bool) {
        self.cfg.single_emergency = on;
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, users={}, horizon_s={}, seed={})",
            self.cfg.name, self.cfg.user_count, self.cfg.run_horizon, self.cfg.master_seed
        )
    }
}

#[pyclass(name = "RunResult", module = "pyoppsim")]
struct RunResult {
    out: RunOutput,
}

impl RunResult {
    fn summary(&self) -> &SummaryReport {
        &self.out.summary
    }
}

#[pymethods]
impl RunResult {
    #[getter]
    fn seed(&self) -> u64 {
        self.out.seed
    }

    #[getter]
    fn message_count(&self) -> usize {
        self.summary().message_count
    }

    #[getter]
    fn delivery_rate(&self) -> Option<f64> {
        self.summary().delivery_rate
    }

    #[getter]
    fn delay_mean_s(&self) -> Option<f64> {
        self.summary().delay_mean_s
    }

    #[getter]
    fn overhead_mean_pct(&self) -> Option<f64> {
        self.summary().overhead_mean_pct
    }

    #[getter]
    fn angry_count(&self) -> u64 {
        self.summary().angry_count
    }

    #[getter]
    fn total_receptions(&self) -> u64 {
        self.summary().total_receptions
    }

    /// `(time, msg_id, to_node, from_node, was_duplicate)` for every reception.
    fn events(&self) -> Vec<(f64, usize, usize, usize, bool)> {
        self.out
            .deliveries
            .iter()
            .map(|d| {
                (
                    d.time.secs(),
                    d.msg_id,
                    d.to_node,
                    d.from_node,
                    d.was_duplicate,
                )
            })
            .collect()
    }

    fn final_positions(&self) -> Vec<(f64, f64)> {
        self.out
            .final_positions
            .iter()
            .map(|p| (p.x, p.y))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(self.summary()).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

/// Runs `scenario` once, with `seed` overriding its master seed.
#[pyfunction]
#[pyo3(signature = (scenario, seed=None))]
fn run(py: Python<'_>, scenario: &Scenario, seed: Option<u64>) -> PyResult<RunResult> {
    let mut cfg = scenario.cfg.clone();
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let out = py
        .detach(|| sim::run(&cfg, RunOptions::default()))
        .map_err(|vs| {
            let text: Vec<String> = vs
                .iter()
                .map(|v| format!("{}: {}", v.path, v.message))
                .collect();
            PyValueError::new_err(text.join("; "))
        })?;
    Ok(RunResult { out })
}

#[pyfunction]
#[pyo3(signature = (popularity, matching=0, keywords=0))]
fn lower_bound(popularity: f64, matching: usize, keywords: usize) -> f64 {
    reaction::bound_from_counts(popularity, matching, keywords)
}

/// `n` reaction indices drawn from `base` above `lb`.
#[pyfunction]
#[pyo3(signature = (base, lb, n=1, seed=0))]
fn draw_reactions(base: Vec<f64>, lb: f64, n: usize, seed: u64) -> PyResult<Vec<usize>> {
    let sum: f64 = base.iter().sum();
    if base.is_empty() || (sum - 1.0).abs() > 1e-9 || base.iter().any(|p| *p < 0.0) {
        return Err(PyValueError::new_err(
            "base must be non-negative and sum to 1",
        ));
    }
    let mut rng = RngStream::new(seed, StreamId::Custom("python".into()));
    Ok((0..n)
        .map(|_| reaction::draw_reaction(&base, lb, &mut rng))
        .collect())
}

#[pyfunction]
fn jain_index(values: Vec<f64>) -> Option<f64> {
    oppsim::metrics::jain_index(&values)
}

#[pymodule]
fn pyoppsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(draw_reactions, m)?)?;
    m.add_function(wrap_pyfunction!(jain_index, m)?)?;
    Ok(())
}
