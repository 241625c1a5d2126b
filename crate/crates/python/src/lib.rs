//! Python bindings for the core library.
//!
//! The module mirrors the Rust surface closely: a [`LossNet`] class wrapping
//! the parametric loss, free functions for hardness, pair comparison and the
//! chaotic coefficient stream, and drivers for the evolutionary and
//! gradient-based pretraining loops plus the synthetic-blob comparison.
//! Reports cross the boundary as plain dicts so the Python side needs no
//! extra types.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use edl_core::chaos::ChaosState;
use edl_core::downstream::{compare_losses, BlobConfig};
use edl_core::evolve::{
    gd_pretrain, run_evolution, EvolutionConfig, GdConfig, GenerationRecord, MutationMode,
};
use edl_core::fitness::{compare_pair, estimate_fitness, ranking_loss, FitnessReport};
use edl_core::lossnet::LossNetParams;
use edl_core::probspace::{hardness, MixtureConfig, ProbLabelPair};
use edl_core::seeds;

fn to_py(e: edl_core::Error) -> PyErr {
    match e {
        edl_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn pair_from_py(probs: Vec<f64>, label: usize) -> PyResult<ProbLabelPair> {
    ProbLabelPair::new(probs, label).map_err(to_py)
}

fn parse_mode(mode: &str) -> PyResult<MutationMode> {
    match mode {
        "chaotic" => Ok(MutationMode::Chaotic),
        "normal" => Ok(MutationMode::Normal),
        other => Err(PyValueError::new_err(format!(
            "unknown mutation mode `{other}` (expected `chaotic` or `normal`)"
        ))),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &FitnessReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("fitness", r.fitness)?;
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("pair_count", r.pair_count)?;
    d.set_item("tie_count", r.tie_count)?;
    d.set_item("batch_count", r.batch_count)?;
    Ok(d)
}

fn record_dict<'py>(py: Python<'py>, r: &GenerationRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("generation", r.generation)?;
    d.set_item("sigma", r.sigma)?;
    d.set_item("best_fitness", r.best_fitness)?;
    d.set_item("mean_fitness", r.mean_fitness)?;
    d.set_item("best_accuracy", r.best_accuracy)?;
    d.set_item("mean_accuracy", r.mean_accuracy)?;
    d.set_item("val_fitness", r.val_fitness)?;
    d.set_item("val_accuracy", r.val_accuracy)?;
    d.set_item("global_best_fitness", r.global_best_fitness)?;
    d.set_item("refill_attempts", r.refill_attempts)?;
    d.set_item("chaos_min", r.chaos_min)?;
    d.set_item("chaos_mean", r.chaos_mean)?;
    d.set_item("chaos_max", r.chaos_max)?;
    d.set_item("chaos_reseeds", r.chaos_reseeds)?;
    Ok(d)
}

/// Parametric classification loss: an MLP scoring `[p, e_y]`.
#[pyclass(module = "edl_py")]
struct LossNet {
    inner: LossNetParams,
}

#[pymethods]
impl LossNet {
    /// Random network for `class_count` classes, reproducible from `seed`.
    #[staticmethod]
    #[pyo3(signature = (class_count, seed, init_scale = 1.0))]
    fn init(class_count: usize, seed: u64, init_scale: f64) -> PyResult<Self> {
        let mut rng = seeds::stream(seed, seeds::tag::INIT, 0);
        let inner = LossNetParams::init(class_count, &mut rng, init_scale).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// All-zero network; outputs the constant softplus(0) for every input.
    #[staticmethod]
    fn zeros(class_count: usize) -> PyResult<Self> {
        Ok(Self {
            inner: LossNetParams::zeros(class_count).map_err(to_py)?,
        })
    }

    /// Read a checkpoint written by `save` or by the CLI.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: LossNetParams::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.inner.class_count()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// Flat parameter vector, layer by layer, weights before bias.
    fn params(&self) -> Vec<f64> {
        self.inner.flat().to_vec()
    }

    fn set_params(&mut self, flat: Vec<f64>) -> PyResult<()> {
        self.inner =
            LossNetParams::from_flat(self.inner.class_count(), flat).map_err(to_py)?;
        Ok(())
    }

    /// Loss value for one probability vector and its true label.
    fn forward(&self, probs: Vec<f64>, label: usize) -> PyResult<f64> {
        let pair = pair_from_py(probs, label)?;
        self.inner.forward(&pair).map_err(to_py)
    }

    /// Gradient of the loss with respect to the probability vector.
    fn prob_gradient(&self, probs: Vec<f64>, label: usize) -> PyResult<Vec<f64>> {
        let c = self.inner.class_count();
        let pair = pair_from_py(probs, label)?;
        let grads = self.inner.backward(&pair, 1.0).map_err(to_py)?;
        Ok(grads.d_input[..c].to_vec())
    }

    /// Monte-Carlo ranking fitness on freshly sampled pairs.
    #[pyo3(signature = (seed, batches = 4, pairs_per_batch = 1024))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        seed: u64,
        batches: usize,
        pairs_per_batch: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mixture = MixtureConfig::default();
        let mut rng = seeds::stream(seed, seeds::tag::FRESH_EVAL, 0);
        let mut ws = self.inner.workspace();
        let report =
            estimate_fitness(&self.inner, &mixture, batches, pairs_per_batch, &mut rng, &mut ws)
                .map_err(to_py)?;
        report_dict(py, &report)
    }

    fn __repr__(&self) -> String {
        format!(
            "LossNet(class_count={}, param_count={})",
            self.inner.class_count(),
            self.inner.param_count()
        )
    }
}

/// Hardness `D(p, y) = 1 - p_y` of one sample.
#[pyfunction]
#[pyo3(name = "hardness")]
fn hardness_py(probs: Vec<f64>, label: usize) -> PyResult<f64> {
    Ok(hardness(&pair_from_py(probs, label)?))
}

/// Hardness gap, trend sign, loss gap, and ranking loss for an ordered pair.
#[pyfunction]
fn compare<'py>(
    py: Python<'py>,
    net: &LossNet,
    probs_a: Vec<f64>,
    label_a: usize,
    probs_b: Vec<f64>,
    label_b: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let a = pair_from_py(probs_a, label_a)?;
    let b = pair_from_py(probs_b, label_b)?;
    let cmp = compare_pair(&net.inner, &a, &b).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("delta_d", cmp.delta_d)?;
    d.set_item("sign", cmp.sign)?;
    d.set_item("delta_l", cmp.delta_l)?;
    d.set_item("ranking_loss", ranking_loss(&cmp))?;
    Ok(d)
}

/// First `n` coefficients of the logistic-map stream used by chaotic
/// mutation. `x0` overrides the seeded random starting point.
#[pyfunction]
#[pyo3(signature = (seed, n, x0 = None))]
fn chaos_sequence(seed: u64, n: usize, x0: Option<f64>) -> PyResult<Vec<f64>> {
    let rng = seeds::stream(seed, seeds::tag::CHAOS, 0);
    let mut state = match x0 {
        Some(x) => ChaosState::with_start(x, rng),
        None => ChaosState::new(rng),
    };
    Ok((0..n).map(|_| state.next()).collect())
}

/// Evolutionary pretraining. Returns `(net, history)` where `history` is a
/// list of per-generation dicts. Omitted keyword arguments keep the
/// reference defaults.
#[pyfunction]
#[pyo3(signature = (
    mode, seed,
    generations = None, population_size = None, elite_count = None,
    batches = None, pairs_per_batch = None, sigma_high = None,
    sigma_low = None, accuracy_threshold = None, max_attempts = None,
    class_count = None, init_scale = None, validation_pairs = None,
    workers = None,
))]
#[allow(clippy::too_many_arguments)]
fn pretrain<'py>(
    py: Python<'py>,
    mode: &str,
    seed: u64,
    generations: Option<usize>,
    population_size: Option<usize>,
    elite_count: Option<usize>,
    batches: Option<usize>,
    pairs_per_batch: Option<usize>,
    sigma_high: Option<f64>,
    sigma_low: Option<f64>,
    accuracy_threshold: Option<f64>,
    max_attempts: Option<usize>,
    class_count: Option<usize>,
    init_scale: Option<f64>,
    validation_pairs: Option<usize>,
    workers: Option<usize>,
) -> PyResult<(LossNet, Vec<Bound<'py, PyDict>>)> {
    let mode = parse_mode(mode)?;
    let mut cfg = EvolutionConfig::default();
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = $field { cfg.$field = v; })*
        };
    }
    set!(
        generations, population_size, elite_count, batches, pairs_per_batch,
        sigma_high, sigma_low, accuracy_threshold, max_attempts, class_count,
        init_scale, validation_pairs, workers
    );
    let mixture = MixtureConfig::default();
    let result = run_evolution(&cfg, &mixture, mode, seed, |_| {}).map_err(to_py)?;
    let history = result
        .history
        .iter()
        .map(|r| record_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    Ok((LossNet { inner: result.best }, history))
}

/// Gradient-based pretraining of the same objective. Returns
/// `(net, validation_report)`.
#[pyfunction]
#[pyo3(name = "gd_pretrain", signature = (
    seed,
    steps = None, learning_rate = None, pairs_per_step = None,
    class_count = None, init_scale = None, validation_pairs = None,
))]
fn gd_pretrain_py<'py>(
    py: Python<'py>,
    seed: u64,
    steps: Option<usize>,
    learning_rate: Option<f64>,
    pairs_per_step: Option<usize>,
    class_count: Option<usize>,
    init_scale: Option<f64>,
    validation_pairs: Option<usize>,
) -> PyResult<(LossNet, Bound<'py, PyDict>)> {
    let mut cfg = GdConfig::default();
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = $field { cfg.$field = v; })*
        };
    }
    set!(steps, learning_rate, pairs_per_step, class_count, init_scale, validation_pairs);
    let mixture = MixtureConfig::default();
    let out = gd_pretrain(&cfg, &mixture, seed, |_| {}).map_err(to_py)?;
    let report = report_dict(py, &out.final_val)?;
    Ok((LossNet { inner: out.params }, report))
}

/// Train linear classifiers on Gaussian blobs with cross-entropy and with
/// the learned loss; returns per-seed rows and the two mean test accuracies.
#[pyfunction]
#[pyo3(signature = (net, seeds, epochs = 400, learning_rate = 0.5))]
fn compare_on_blobs<'py>(
    py: Python<'py>,
    net: &LossNet,
    seeds: Vec<u64>,
    epochs: usize,
    learning_rate: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut blob = BlobConfig::default();
    blob.classes = net.inner.class_count();
    let report =
        compare_losses(&blob, &net.inner, epochs, learning_rate, &seeds).map_err(to_py)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("seed", r.seed)?;
            d.set_item("ce_train_accuracy", r.ce_train_accuracy)?;
            d.set_item("learned_train_accuracy", r.learned_train_accuracy)?;
            d.set_item("ce_test_accuracy", r.ce_test_accuracy)?;
            d.set_item("learned_test_accuracy", r.learned_test_accuracy)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("rows", rows)?;
    d.set_item("mean_ce_accuracy", report.mean_ce_accuracy)?;
    d.set_item("mean_learned_accuracy", report.mean_learned_accuracy)?;
    Ok(d)
}

#[pymodule]
fn edl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LossNet>()?;
    m.add_function(wrap_pyfunction!(hardness_py, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(chaos_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(pretrain, m)?)?;
    m.add_function(wrap_pyfunction!(gd_pretrain_py, m)?)?;
    m.add_function(wrap_pyfunction!(compare_on_blobs, m)?)?;
    Ok(())
}
