//! Python bindings. Flux vectors are lists of floats, flux matrices are
//! lists of rows.

use fluxmp_core::baselines::{brw_balance, noise_benchmark, NoiseBenchConfig};
use fluxmp_core::graph::Norm;
use fluxmp_core::metrics::{self, mean_cosine, pearson_with_p};
use fluxmp_core::mpo::{EtaMode, MpoConfig};
use fluxmp_core::nn::{ArchConfig, Checkpoint};
use fluxmp_core::synth::{self, DatasetOptions, GraphSpec, NlfKind, SyntheticDataset};
use fluxmp_core::trainer::{self, TrainConfig, TrainData};
use fluxmp_core::{DirectedFactorGraph, ErrorKind, FluxMatrix};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: fluxmp_core::Error) -> PyErr {
    match e.kind() {
        ErrorKind::Data => PyValueError::new_err(e.to_string()),
        ErrorKind::Numerical => PyArithmeticError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>], cols: usize) -> PyResult<FluxMatrix> {
    FluxMatrix::from_rows(cols, rows).map_err(py_err)
}

fn mpo_config(beta: f64, alpha: f64, max_epochs: usize, rules: &str, eta: &str) -> PyResult<MpoConfig> {
    let mut cfg = match rules {
        "default" => MpoConfig::default(),
        "reference" => MpoConfig::reference(beta),
        other => return Err(PyValueError::new_err(format!("unknown rules `{other}`"))),
    };
    cfg.beta = beta;
    cfg.alpha = alpha;
    cfg.max_epochs = max_epochs;
    cfg.eta_mode = match eta {
        "uniform" => EtaMode::Uniform,
        "imbalance_weighted" => EtaMode::ImbalanceWeighted,
        other => return Err(PyValueError::new_err(format!("unknown eta mode `{other}`"))),
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

fn parse_norm(norm: &str) -> PyResult<Norm> {
    match norm {
        "l1" => Ok(Norm::L1),
        "l2" => Ok(Norm::L2),
        other => Err(PyValueError::new_err(format!("unknown norm `{other}`"))),
    }
}

/// Validated directed factor graph.
#[pyclass(name = "Graph", module = "fluxmp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: DirectedFactorGraph,
}

#[pymethods]
impl PyGraph {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: DirectedFactorGraph::from_json_str(text).map_err(py_err)?,
        })
    }

    /// Random connected test graph.
    #[staticmethod]
    #[pyo3(signature = (factors, variables, cycles=0, seed=42, min_features=3, max_features=6))]
    fn generate(
        factors: usize,
        variables: usize,
        cycles: usize,
        seed: u64,
        min_features: usize,
        max_features: usize,
    ) -> PyResult<Self> {
        let spec = GraphSpec::new(factors, variables, cycles, seed).with_features(min_features, max_features);
        Ok(Self {
            inner: synth::generate_test_graph(&spec).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn n_factors(&self) -> usize {
        self.inner.n_factors()
    }

    #[getter]
    fn n_variables(&self) -> usize {
        self.inner.n_variables()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn variable_names(&self) -> Vec<String> {
        self.inner.variable_names()
    }

    fn stoichiometry(&self) -> Vec<Vec<f64>> {
        self.inner.stoichiometry().to_rows()
    }

    fn imbalances(&self, flux: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.factor_imbalances(&flux).map_err(py_err)
    }

    #[pyo3(signature = (flux, norm="l1"))]
    fn imbalance_loss(&self, flux: Vec<f64>, norm: &str) -> PyResult<f64> {
        self.inner.imbalance_loss(&flux, parse_norm(norm)?).map_err(py_err)
    }

    /// `(count, capped)`.
    #[pyo3(signature = (cap=fluxmp_core::graph::DEFAULT_CYCLE_CAP))]
    fn count_cycles(&self, cap: usize) -> (usize, bool) {
        let c = self.inner.count_cycles(cap);
        (c.count, c.capped)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(factors={}, variables={}, edges={})",
            self.inner.n_factors(),
            self.inner.n_variables(),
            self.inner.n_edges()
        )
    }
}

/// Balances one flux vector. Returns the balanced vector and a dict with
/// the per-epoch L1 imbalance, epoch count and convergence flag.
#[pyfunction]
#[pyo3(signature = (graph, w0, beta=0.5, alpha=1e-6, max_epochs=10_000, rules="default", eta="uniform"))]
#[allow(clippy::too_many_arguments)]
fn run_mpo<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    w0: Vec<f64>,
    beta: f64,
    alpha: f64,
    max_epochs: usize,
    rules: &str,
    eta: &str,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let cfg = mpo_config(beta, alpha, max_epochs, rules, eta)?;
    let (w, trace) = py
        .detach(|| fluxmp_core::run_mpo(&graph.inner, &w0, &cfg))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("l1_imbalance", trace.l1_imbalance)?;
    d.set_item("epochs_run", trace.epochs_run)?;
    d.set_item("converged", trace.converged)?;
    Ok((w, d))
}

#[pyfunction]
#[pyo3(signature = (graph, rows, beta=0.5, alpha=1e-6, max_epochs=10_000, rules="default", eta="uniform"))]
#[allow(clippy::too_many_arguments)]
fn run_mpo_batch(
    py: Python<'_>,
    graph: &PyGraph,
    rows: Vec<Vec<f64>>,
    beta: f64,
    alpha: f64,
    max_epochs: usize,
    rules: &str,
    eta: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg = mpo_config(beta, alpha, max_epochs, rules, eta)?;
    let w0 = to_matrix(&rows, graph.inner.n_variables())?;
    let out = py
        .detach(|| fluxmp_core::run_mpo_batch(&graph.inner, &w0, &cfg))
        .map_err(py_err)?;
    Ok(out.to_rows())
}

#[pyfunction]
#[pyo3(name = "brw_balance", signature = (graph, w0, epochs=1))]
fn py_brw_balance(graph: &PyGraph, w0: Vec<f64>, epochs: usize) -> PyResult<Vec<f64>> {
    brw_balance(&graph.inner, &w0, epochs).map_err(py_err)
}

/// `(gamma, seed, cos_noisy, cos_mpo, cos_brw)`.
type TrialRow = (f64, u64, f64, f64, f64);

/// MPO against BRW under orthogonal noise, one row per gamma and seed.
#[pyfunction]
#[pyo3(name = "noise_benchmark", signature = (graph, seeds=20, gammas=None, brw_epochs=1))]
fn py_noise_benchmark(
    py: Python<'_>,
    graph: &PyGraph,
    seeds: u64,
    gammas: Option<Vec<f64>>,
    brw_epochs: usize,
) -> PyResult<Vec<TrialRow>> {
    let mut cfg = NoiseBenchConfig {
        seeds: (0..seeds).collect(),
        brw_epochs,
        ..NoiseBenchConfig::default()
    };
    if let Some(g) = gammas {
        cfg.gammas = g;
    }
    let trials = py
        .detach(|| noise_benchmark(&graph.inner, &cfg))
        .map_err(py_err)?;
    Ok(trials
        .into_iter()
        .map(|t| (t.gamma, t.seed, t.cos_noisy, t.cos_mpo, t.cos_brw))
        .collect())
}

/// Synthetic dataset: balanced ground truth, per-variable observations and
/// a train/val/test split.
#[pyclass(name = "Dataset", module = "fluxmp", frozen)]
struct PyDataset {
    inner: SyntheticDataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (graph, samples=500, nlf=1, seed=42, sparsity=0.2, min_flux=0.1))]
    fn simulate(
        py: Python<'_>,
        graph: &PyGraph,
        samples: usize,
        nlf: u8,
        seed: u64,
        sparsity: f64,
        min_flux: f64,
    ) -> PyResult<Self> {
        let kind = match nlf {
            1 => NlfKind::Nlf1,
            2 => NlfKind::Nlf2,
            other => return Err(PyValueError::new_err(format!("nlf must be 1 or 2, got {other}"))),
        };
        let opts = DatasetOptions {
            samples,
            kind,
            seed,
            sparsity,
            min_flux,
            ..DatasetOptions::default()
        };
        let inner = py
            .detach(|| synth::simulate_dataset(&graph.inner, &opts))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn graph(&self) -> PyGraph {
        PyGraph {
            inner: self.inner.graph.clone(),
        }
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn flux_truth(&self) -> Vec<Vec<f64>> {
        self.inner.flux_truth.to_rows()
    }

    /// One `samples × features` block per variable.
    #[getter]
    fn observations(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.observations.blocks().iter().map(|b| b.to_rows()).collect()
    }

    /// `(a, b)` link coefficients per variable.
    #[getter]
    fn coefficients(&self) -> Vec<(f64, f64)> {
        self.inner.coefficients.iter().map(|c| (c.a, c.b)).collect()
    }

    /// `(train, val, test)` row indices.
    #[getter]
    fn split(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let s = &self.inner.split;
        (s.train.clone(), s.val.clone(), s.test.clone())
    }

    fn max_truth_imbalance(&self) -> f64 {
        self.inner.max_truth_imbalance()
    }
}

/// Trained per-variable network ensemble.
#[pyclass(name = "Model", module = "fluxmp", frozen)]
struct PyModel {
    checkpoint: Checkpoint,
    /// `(epoch, train_coherency, val_coherency)` per epoch; empty for loaded models.
    history: Vec<(usize, f64, Option<f64>)>,
    best_epoch: usize,
    stop: String,
}

#[pymethods]
impl PyModel {
    /// Trains on the dataset's train split, monitoring its validation split.
    #[staticmethod]
    #[pyo3(signature = (
        dataset, max_epochs=500, lr=0.05, lambda_anchor=1.0, lambda_l2=1e-4,
        lambda_gate=1e-3, mpo_every=10, patience=30, dropout=0.5, appendix=false, seed=42,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        dataset: &PyDataset,
        max_epochs: usize,
        lr: f64,
        lambda_anchor: f64,
        lambda_l2: f64,
        lambda_gate: f64,
        mpo_every: usize,
        patience: usize,
        dropout: f64,
        appendix: bool,
        seed: u64,
    ) -> PyResult<Self> {
        let arch = if appendix { ArchConfig::appendix() } else { ArchConfig::default() };
        let cfg = TrainConfig {
            max_epochs,
            lr,
            lambda_anchor,
            lambda_l2,
            lambda_gate,
            mpo_every,
            patience,
            seed,
            arch: ArchConfig {
                dropout_rate: dropout,
                ..arch
            },
            ..TrainConfig::default()
        };
        let ds = &dataset.inner;
        let (_, train_obs) = ds.subset(&ds.split.train);
        let (val_truth, val_obs) = ds.subset(&ds.split.val);
        let has_val = !ds.split.val.is_empty();
        let outcome = py
            .detach(|| {
                trainer::train(
                    &ds.graph,
                    TrainData {
                        train: &train_obs,
                        val: has_val.then_some(&val_obs),
                        val_truth: has_val.then_some(&val_truth),
                    },
                    &cfg,
                )
            })
            .map_err(py_err)?;
        Ok(Self {
            history: outcome
                .history
                .records
                .iter()
                .map(|r| (r.epoch, r.train_coherency, r.val_coherency))
                .collect(),
            best_epoch: outcome.best_epoch,
            stop: format!("{:?}", outcome.stop),
            checkpoint: outcome.checkpoint,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let checkpoint = Checkpoint::load(&path).map_err(py_err)?;
        Ok(Self {
            best_epoch: checkpoint.epoch,
            checkpoint,
            history: Vec::new(),
            stop: String::new(),
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.checkpoint.save(&path).map_err(py_err)
    }

    /// Eval-mode predictions for every sample of `dataset`.
    fn predict(&self, py: Python<'_>, dataset: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
        let out = py
            .detach(|| trainer::predict(&self.checkpoint.ensemble, &dataset.inner.observations))
            .map_err(py_err)?;
        Ok(out.to_rows())
    }

    #[getter]
    fn history(&self) -> Vec<(usize, f64, Option<f64>)> {
        self.history.clone()
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    #[getter]
    fn stop_reason(&self) -> String {
        self.stop.clone()
    }
}

/// Mean row-wise cosine similarity; zero-norm rows score 0.
#[pyfunction]
#[pyo3(name = "mean_cosine")]
fn py_mean_cosine(pred: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<f64> {
    let cols = pred.first().map_or(0, Vec::len);
    let p = to_matrix(&pred, cols)?;
    let t = to_matrix(&truth, cols)?;
    Ok(mean_cosine(&p, &t).map_err(py_err)?.mean)
}

/// `(r, p)` with a two-sided Student t p-value.
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    pearson_with_p(&x, &y).map_err(py_err)
}

/// Report as a JSON string, numbers rounded to six significant digits.
#[pyfunction]
#[pyo3(signature = (graph, pred, truth=None))]
fn evaluate(graph: &PyGraph, pred: Vec<Vec<f64>>, truth: Option<Vec<Vec<f64>>>) -> PyResult<String> {
    let k = graph.inner.n_variables();
    let p = to_matrix(&pred, k)?;
    let t = truth.map(|t| to_matrix(&t, k)).transpose()?;
    let report = metrics::evaluate(&graph.inner, &p, t.as_ref()).map_err(py_err)?;
    Ok(report.rounded().to_json())
}

#[pymodule]
fn fluxmp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(run_mpo, m)?)?;
    m.add_function(wrap_pyfunction!(run_mpo_batch, m)?)?;
    m.add_function(wrap_pyfunction!(py_brw_balance, m)?)?;
    m.add_function(wrap_pyfunction!(py_noise_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(py_mean_cosine, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("NOISE_GAMMAS", synth::NOISE_GAMMAS.to_vec())?;
    Ok(())
}
