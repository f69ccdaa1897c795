//! Python bindings for the splitprune planner.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use splitprune_core::agent::{Agent as CoreAgent, MetricsRow, PlanReport, TrainConfig};
use splitprune_core::brute::{enumerate_best, Grid, DEFAULT_CAP};
use splitprune_core::env::{Outcome, PruningEnv};
use splitprune_core::error::Error;
use splitprune_core::graph::{self, LayerGraph, Plan as CorePlan, PruneVector};
use splitprune_core::oracle::{AccuracyOracle, Surrogate};
use splitprune_core::perf::{self, Environment as CoreEnvironment, LatencyBreakdown};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Refused { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn latency_dict<'py>(py: Python<'py>, l: &LatencyBreakdown) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t_edge", l.t_edge)?;
    d.set_item("t_trans", l.t_trans)?;
    d.set_item("t_cloud", l.t_cloud)?;
    d.set_item("total", l.total)?;
    Ok(d)
}

fn outcome_dict<'py>(
    py: Python<'py>,
    plan: &CorePlan,
    latency: &LatencyBreakdown,
    accuracy: f64,
    reward: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("partition", plan.partition)?;
    d.set_item("rates", plan.prune.rates.clone())?;
    d.set_item("accuracy", accuracy)?;
    d.set_item("reward", reward)?;
    d.set_item("latency", latency_dict(py, latency)?)?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &PlanReport) -> PyResult<Bound<'py, PyDict>> {
    let d = outcome_dict(py, &r.plan, &r.latency, r.accuracy, r.reward)?;
    d.set_item("option_values", r.option_values.clone())?;
    Ok(d)
}

fn metrics_dict<'py>(py: Python<'py>, m: &MetricsRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("episode", m.episode)?;
    d.set_item("option", m.option)?;
    d.set_item("reward", m.reward)?;
    d.set_item("t_edge", m.t_edge)?;
    d.set_item("t_trans", m.t_trans)?;
    d.set_item("t_cloud", m.t_cloud)?;
    d.set_item("acc", m.acc)?;
    d.set_item("loss_q", m.loss_q)?;
    d.set_item("loss_option", m.loss_option)?;
    d.set_item("noise_scale", m.noise_scale)?;
    Ok(d)
}

/// A layer graph: a named preset or a model described in the text format.
#[pyclass(frozen, module = "splitprune")]
struct Model {
    inner: LayerGraph,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        graph::preset(name)
            .map(|inner| Model { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        LayerGraph::from_text(text)
            .map(|inner| Model { inner })
            .map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn conv_count(&self) -> usize {
        self.inner.conv_count()
    }

    #[getter]
    fn total_flops(&self) -> u64 {
        self.inner.total_flops()
    }

    /// Partition points the planner may choose from.
    #[getter]
    fn partitions(&self) -> Vec<usize> {
        self.inner.admissible_partitions()
    }

    fn layer_flops(&self, layer: usize) -> PyResult<u64> {
        self.check_layer(layer)?;
        Ok(self.inner.layer_flops(layer))
    }

    /// Bytes sent over the link when splitting before layer `partition`.
    fn transfer_bytes(&self, partition: usize) -> PyResult<u64> {
        if partition > self.inner.len() {
            return Err(PyValueError::new_err(format!(
                "partition {partition} beyond {} layers",
                self.inner.len()
            )));
        }
        Ok(self.inner.transfer_bytes(partition))
    }

    /// Per-layer summary as a list of dicts.
    fn layers<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let d = PyDict::new(py);
                d.set_item("kind", l.kind.as_str())?;
                d.set_item("in_channels", l.in_channels)?;
                d.set_item("out_channels", l.out_channels)?;
                d.set_item("out_spatial", l.out_spatial)?;
                d.set_item("flops", self.inner.layer_flops(i))?;
                d.set_item("output_bytes", self.inner.output_bytes(i))?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(name={:?}, layers={}, convs={})",
            self.inner.name,
            self.inner.len(),
            self.inner.conv_count()
        )
    }
}

impl Model {
    fn check_layer(&self, layer: usize) -> PyResult<()> {
        if layer >= self.inner.len() {
            return Err(PyValueError::new_err(format!(
                "layer {layer} out of range for {} layers",
                self.inner.len()
            )));
        }
        Ok(())
    }
}

/// Link rate, edge slowdown and accuracy floor.
#[pyclass(frozen, module = "splitprune")]
struct Environment {
    inner: CoreEnvironment,
}

#[pymethods]
impl Environment {
    #[new]
    #[pyo3(signature = (r_tran_kbps = 1280.0, r_comp = 20.0, acc_req = 0.8))]
    fn new(r_tran_kbps: f64, r_comp: f64, acc_req: f64) -> PyResult<Self> {
        CoreEnvironment::new(r_tran_kbps, r_comp, acc_req)
            .map(|inner| Environment { inner })
            .map_err(py_err)
    }

    #[getter]
    fn r_tran_kbps(&self) -> f64 {
        self.inner.r_tran_kbps()
    }

    /// Link rate in bytes per second.
    #[getter]
    fn r_tran(&self) -> f64 {
        self.inner.r_tran
    }

    #[getter]
    fn r_comp(&self) -> f64 {
        self.inner.r_comp
    }

    #[getter]
    fn acc_req(&self) -> f64 {
        self.inner.acc_req
    }

    fn __repr__(&self) -> String {
        format!(
            "Environment(r_tran_kbps={}, r_comp={}, acc_req={})",
            self.inner.r_tran_kbps(),
            self.inner.r_comp,
            self.inner.acc_req
        )
    }
}

fn to_plan(partition: usize, rates: Vec<f64>) -> CorePlan {
    CorePlan {
        partition,
        prune: PruneVector::new(rates),
    }
}

/// Latency breakdown of a plan, in seconds.
#[pyfunction]
fn latency<'py>(
    py: Python<'py>,
    model: &Model,
    env: &Environment,
    partition: usize,
    rates: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let l = perf::latency(&model.inner, &to_plan(partition, rates), &env.inner).map_err(py_err)?;
    latency_dict(py, &l)
}

/// Reward of a plan given its measured accuracy.
#[pyfunction]
fn reward(
    model: &Model,
    env: &Environment,
    partition: usize,
    rates: Vec<f64>,
    accuracy: f64,
) -> PyResult<f64> {
    perf::reward(
        &model.inner,
        &to_plan(partition, rates),
        &env.inner,
        accuracy,
    )
    .map_err(py_err)
}

#[pyfunction]
fn presets() -> Vec<String> {
    graph::preset_names()
}

/// A model, an environment and a surrogate accuracy oracle, bundled for
/// search and training.
#[pyclass(frozen, module = "splitprune")]
struct Planner {
    graph: LayerGraph,
    env: CoreEnvironment,
    oracle: Surrogate,
    r_max: f64,
}

impl Planner {
    fn penv(&self) -> PruningEnv<'_> {
        PruningEnv::new(&self.graph, &self.env, &self.oracle, self.r_max)
    }
}

#[pymethods]
impl Planner {
    #[new]
    #[pyo3(signature = (model, env = None, base_acc = 0.9, r_max = 0.9))]
    fn new(model: &Model, env: Option<&Environment>, base_acc: f64, r_max: f64) -> PyResult<Self> {
        if !(r_max > 0.0 && r_max < 1.0) {
            return Err(PyValueError::new_err(format!(
                "r_max {r_max} must lie in (0, 1)"
            )));
        }
        let oracle = Surrogate::for_graph(&model.inner, base_acc).map_err(py_err)?;
        Ok(Planner {
            graph: model.inner.clone(),
            env: env.map(|e| e.inner.clone()).unwrap_or_default(),
            oracle,
            r_max,
        })
    }

    /// Surrogate accuracy of a pruning vector.
    fn accuracy(&self, rates: Vec<f64>) -> PyResult<f64> {
        self.oracle
            .evaluate(&self.graph, &PruneVector::new(rates))
            .map_err(py_err)
    }

    /// Accuracy, latency and reward of a full plan.
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        partition: usize,
        rates: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let o: Outcome = self
            .penv()
            .finish(to_plan(partition, rates))
            .map_err(py_err)?;
        outcome_dict(py, &o.plan, &o.latency, o.accuracy, o.reward)
    }

    /// Best plan over a grid of pruning levels by exhaustive enumeration.
    #[pyo3(signature = (levels = None, partitions = None, cap = DEFAULT_CAP))]
    fn brute<'py>(
        &self,
        py: Python<'py>,
        levels: Option<Vec<f64>>,
        partitions: Option<Vec<usize>>,
        cap: u128,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut grid = Grid::default();
        if let Some(l) = levels {
            grid.levels = l;
        }
        grid.partitions = partitions;
        let o = py
            .detach(|| enumerate_best(&self.penv(), &grid, cap))
            .map_err(py_err)?;
        outcome_dict(py, &o.plan, &o.latency, o.accuracy, o.reward)
    }

    /// Trains an agent. Returns it with the per-episode metrics log.
    #[pyo3(signature = (episodes = 1000, seed = 0, **overrides))]
    fn train<'py>(
        &self,
        py: Python<'py>,
        episodes: usize,
        seed: u64,
        overrides: Option<&Bound<'py, PyDict>>,
    ) -> PyResult<(Agent, Vec<Bound<'py, PyDict>>)> {
        let mut config = TrainConfig {
            episodes,
            seed,
            ..TrainConfig::default()
        };
        if let Some(o) = overrides {
            apply_overrides(&mut config, o)?;
        }
        config.r_max = self.r_max;
        let (agent, rows) = py
            .detach(|| {
                let penv = self.penv();
                let mut agent = CoreAgent::new(&penv, config)?;
                let rows = agent.train(&penv, |_| {})?;
                Ok::<_, Error>((agent, rows))
            })
            .map_err(py_err)?;
        let rows = rows
            .iter()
            .map(|r| metrics_dict(py, r))
            .collect::<PyResult<_>>()?;
        Ok((Agent { inner: agent }, rows))
    }

    /// Plan chosen by a trained agent in this planner's environment.
    fn plan<'py>(&self, py: Python<'py>, agent: &Agent) -> PyResult<Bound<'py, PyDict>> {
        let r = agent.inner.plan(&self.penv()).map_err(py_err)?;
        report_dict(py, &r)
    }
}

fn apply_overrides(config: &mut TrainConfig, overrides: &Bound<'_, PyDict>) -> PyResult<()> {
    for (key, value) in overrides.iter() {
        let key: String = key.extract()?;
        match key.as_str() {
            "batch_size" => config.batch_size = value.extract()?,
            "lr_q" => config.lr_q = value.extract()?,
            "lr_option" => config.lr_option = value.extract()?,
            "tau" => config.tau = value.extract()?,
            "warmup_per_option" => config.warmup_per_option = value.extract()?,
            "noise_initial" => config.noise_initial = value.extract()?,
            "noise_decay" => config.noise_decay = value.extract()?,
            "epsilon_min" => config.epsilon_min = value.extract()?,
            "reward_scale" => config.reward_scale = value.extract()?,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown training option {other:?}"
                )))
            }
        }
    }
    Ok(())
}

/// A trained hierarchical agent.
#[pyclass(module = "splitprune")]
struct Agent {
    inner: CoreAgent,
}

#[pymethods]
impl Agent {
    #[getter]
    fn learning_episodes(&self) -> u64 {
        self.inner.learning_episodes
    }

    #[getter]
    fn partitions(&self) -> Vec<usize> {
        self.inner.partitions.clone()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        CoreAgent::load(&path)
            .map(|inner| Agent { inner })
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Agent(options={}, learning_episodes={})",
            self.inner.partitions.len(),
            self.inner.learning_episodes
        )
    }
}

#[pymodule]
fn splitprune(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Environment>()?;
    m.add_class::<Planner>()?;
    m.add_class::<Agent>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(latency, m)?)?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    Ok(())
}
