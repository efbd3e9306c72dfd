//! Python bindings: `import surveytax`.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use surveytax::corpus::{self, PaperRecord, SubsetSpec};
use surveytax::eval::{self, ExperimentSpec};
use surveytax::gcn::{self, CheckpointMeta, DropoutMasks, Selection, TrainConfig, CHECKPOINT_VERSION};
use surveytax::graph::{self, AttributedGraph, GraphKind, GraphOptions};
use surveytax::llmjudge::{self, FnTransport, JudgeOptions, PromptSpec};
use surveytax::text::WindowSize;
use surveytax::weaklabel;

create_exception!(surveytax, SurveytaxError, PyException, "Raised for any library error; the message starts with `[category]`.");

fn err(e: surveytax::Error) -> PyErr {
    SurveytaxError::new_err(format!("[{}] {e}", e.category()))
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for surveytax::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(err)
    }
}

/// Serializes `value` and hands it to Python's `json.loads`.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Ordered class list with optional keyword hints.
#[pyclass(name = "Taxonomy", module = "surveytax")]
struct PyTaxonomy {
    inner: corpus::Taxonomy,
}

#[pymethods]
impl PyTaxonomy {
    /// The bundled 16-class taxonomy.
    #[new]
    fn new() -> Self {
        Self { inner: corpus::Taxonomy::bundled() }
    }

    /// Reads a taxonomy TOML file (`classes = [...]`, optional `[hints]`).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: corpus::Taxonomy::load(path).py_err()? })
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes().to_vec()
    }

    #[getter]
    fn hints<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.hints())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A list of labelled paper records.
#[pyclass(name = "Corpus", module = "surveytax")]
struct PyCorpus {
    records: Vec<PaperRecord>,
    taxonomy: corpus::Taxonomy,
}

#[pymethods]
impl PyCorpus {
    /// Reads JSON Lines, optionally filtered by a named subset
    /// (`jan24`, `nov23`, `subset`).
    #[staticmethod]
    #[pyo3(signature = (path, taxonomy=None, subset=None))]
    fn load(path: PathBuf, taxonomy: Option<PathBuf>, subset: Option<&str>) -> PyResult<Self> {
        let taxonomy = match taxonomy {
            Some(p) => corpus::Taxonomy::load(p).py_err()?,
            None => corpus::Taxonomy::bundled(),
        };
        let mut records = corpus::read_records(path, &taxonomy).py_err()?;
        if let Some(name) = subset {
            let spec = SubsetSpec::preset(name)
                .ok_or_else(|| SurveytaxError::new_err(format!("[config] unknown subset {name:?}")))?;
            records = corpus::build_subset(&records, &spec, &taxonomy).py_err()?;
        }
        Ok(Self { records, taxonomy })
    }

    /// Seeded synthetic corpus whose categories determine the labels.
    #[staticmethod]
    #[pyo3(signature = (papers=150, classes=5, noise=0.1, seed=0))]
    fn synthetic(papers: usize, classes: usize, noise: f64, seed: u64) -> PyResult<Self> {
        let taxonomy = corpus::Taxonomy::bundled();
        let spec = surveytax::synthetic::SyntheticSpec {
            papers,
            classes,
            category_noise: noise,
            seed,
            ..Default::default()
        };
        let records = surveytax::synthetic::generate(&spec, &taxonomy).py_err()?;
        Ok(Self { records, taxonomy })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| err(e.into()))?;
        corpus::write_records(std::io::BufWriter::new(file), &self.records).py_err()
    }

    #[getter]
    fn paper_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.paper_id.clone()).collect()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.records.iter().map(|r| r.taxonomy_label.clone()).collect()
    }

    #[getter]
    fn titles(&self) -> Vec<String> {
        self.records.iter().map(|r| r.title.clone()).collect()
    }

    #[getter]
    fn categories(&self) -> Vec<Vec<String>> {
        self.records.iter().map(|r| r.categories.clone()).collect()
    }

    fn record<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyAny>> {
        let r = self
            .records
            .get(index)
            .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(index))?;
        to_py(py, r)
    }

    /// Histograms per month, class, category and keyword.
    #[pyo3(signature = (top_k=corpus::DEFAULT_TOP_KEYWORDS))]
    fn stats<'py>(&self, py: Python<'py>, top_k: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &corpus::corpus_stats(&self.records, &self.taxonomy, top_k).py_err()?)
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }
}

fn graph_kind(kind: &str) -> PyResult<GraphKind> {
    kind.parse().py_err()
}

fn graph_options(window: Option<usize>, min_word_freq: Option<usize>, ablate_features: Option<bool>) -> PyResult<GraphOptions> {
    let mut o = GraphOptions::default();
    if let Some(w) = window {
        o.window_size = WindowSize::new(w).py_err()?;
    }
    if let Some(m) = min_word_freq {
        o.min_word_freq = m;
    }
    if let Some(a) = ablate_features {
        o.ablate_features = a;
    }
    Ok(o)
}

/// An attributed graph over a corpus.
#[pyclass(name = "Graph", module = "surveytax")]
struct PyGraph {
    inner: AttributedGraph,
    /// Fingerprint of the taxonomy the graph was built with; empty for bundles.
    fingerprint: String,
}

#[pymethods]
impl PyGraph {
    /// `kind` is `text`, `coauthor` or `cocategory`; `remove` lists arXiv
    /// categories dropped from co-category edges.
    #[staticmethod]
    #[pyo3(signature = (corpus, kind="cocategory", remove=None, window=None, min_word_freq=None, ablate_features=None))]
    fn build(
        py: Python<'_>,
        corpus: &PyCorpus,
        kind: &str,
        remove: Option<Vec<String>>,
        window: Option<usize>,
        min_word_freq: Option<usize>,
        ablate_features: Option<bool>,
    ) -> PyResult<Self> {
        let kind = graph_kind(kind)?;
        let removed: BTreeSet<String> = remove.unwrap_or_default().into_iter().collect();
        let options = graph_options(window, min_word_freq, ablate_features)?;
        let inner = py
            .detach(|| graph::build_graph(kind, &corpus.records, &corpus.taxonomy, &removed, &options))
            .py_err()?;
        Ok(Self { inner, fingerprint: corpus.taxonomy.fingerprint() })
    }

    #[staticmethod]
    fn read_bundle(dir: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: graph::read_bundle(dir).py_err()?, fingerprint: String::new() })
    }

    fn write_bundle(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.write_bundle(dir).py_err()
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.node_ids.clone()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes.clone()
    }

    /// Class name of every node (`<word>` for text-graph word nodes).
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.iter().map(|&l| self.inner.classes[l].clone()).collect()
    }

    /// Unordered edges as `(src_id, dst_id, weight)`.
    fn edges(&self) -> Vec<(String, String, f64)> {
        self.inner
            .edges()
            .map(|(i, j, w)| (self.inner.node_ids[i].clone(), self.inner.node_ids[j].clone(), w))
            .collect()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &graph::graph_stats(&self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }
}

fn train_config(
    kind: GraphKind,
    lr: Option<f64>,
    epochs: Option<usize>,
    hidden: Option<usize>,
    dropout: Option<f64>,
    selection: Option<&str>,
) -> PyResult<TrainConfig> {
    let mut c = TrainConfig::for_graph(kind);
    if let Some(v) = lr {
        c.learning_rate = v;
    }
    if let Some(v) = epochs {
        c.epochs = v;
    }
    if let Some(v) = hidden {
        c.hidden = v;
    }
    if let Some(v) = dropout {
        c.dropout_rate = v;
    }
    if let Some(s) = selection {
        c.selection = s.parse::<Selection>().py_err()?;
    }
    c.validate().py_err()?;
    Ok(c)
}

/// A finished training run together with the graph it ran on.
#[pyclass(name = "TrainRun", module = "surveytax")]
struct PyTrainRun {
    run: gcn::TrainRun,
    graph: AttributedGraph,
    fingerprint: String,
}

#[pymethods]
impl PyTrainRun {
    /// 1-based epoch whose weights were kept.
    #[getter]
    fn selected_epoch(&self) -> usize {
        self.run.selected_epoch
    }

    #[getter]
    fn loss_trace(&self) -> Vec<f64> {
        self.run.loss_trace.clone()
    }

    #[getter]
    fn val_accuracy_trace(&self) -> Vec<f64> {
        self.run.val_accuracy_trace.clone()
    }

    /// Train, validation and test accuracy plus test weighted F1.
    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.run.metrics)
    }

    /// Node ids of the train, val or test split.
    fn split(&self, role: &str) -> PyResult<Vec<String>> {
        let nodes = match role {
            "train" => self.run.masks.train(),
            "val" => self.run.masks.val(),
            "test" => self.run.masks.test(),
            _ => return Err(SurveytaxError::new_err(format!("[config] unknown split {role:?}"))),
        };
        Ok(nodes.into_iter().map(|i| self.graph.node_ids[i].clone()).collect())
    }

    /// `(paper_id, predicted_class, confidence, source)` for every paper.
    fn weak_labels(&self) -> PyResult<Vec<(String, String, f64, String)>> {
        let set = weaklabel::generate_weak_labels(&self.run, &self.graph).py_err()?;
        Ok(set.entries.into_iter().map(|w| (w.paper_id, w.predicted_class, w.confidence, w.source)).collect())
    }

    /// Writes the weak-label CSV and its `.meta.json` sidecar.
    fn save_weak_labels(&self, path: PathBuf) -> PyResult<()> {
        weaklabel::generate_weak_labels(&self.run, &self.graph).py_err()?.save(path).py_err()
    }

    /// Hidden-layer activations, one row per node.
    fn embeddings(&self) -> PyResult<Vec<Vec<f64>>> {
        let adj = graph::normalize(&self.graph);
        let pass = gcn::forward_with_masks(&self.run.model, &adj, &self.graph.features.values, &DropoutMasks::none())
            .py_err()?;
        Ok(pass.hidden.outer_iter().map(|r| r.to_vec()).collect())
    }

    fn save_checkpoint(&self, path: PathBuf) -> PyResult<()> {
        let meta = CheckpointMeta {
            version: CHECKPOINT_VERSION,
            config: self.run.config.clone(),
            graph_kind: self.graph.kind.to_string(),
            classes: self.graph.classes.clone(),
            taxonomy_fingerprint: self.fingerprint.clone(),
            selected_epoch: self.run.selected_epoch,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        gcn::save_checkpoint(path, &self.run.model, &meta).py_err()
    }
}

/// Trains one GCN. Unset hyper-parameters take the library defaults.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (graph, seed=0, lr=None, epochs=None, hidden=None, dropout=None, selection=None))]
fn train(
    py: Python<'_>,
    graph: &PyGraph,
    seed: u64,
    lr: Option<f64>,
    epochs: Option<usize>,
    hidden: Option<usize>,
    dropout: Option<f64>,
    selection: Option<&str>,
) -> PyResult<PyTrainRun> {
    let config = train_config(graph.inner.kind, lr, epochs, hidden, dropout, selection)?.with_seed(seed);
    let run = py.detach(|| gcn::train(&graph.inner, &config)).py_err()?;
    Ok(PyTrainRun { run, graph: graph.inner.clone(), fingerprint: graph.fingerprint.clone() })
}

/// Multi-seed experiment; returns the report as a dict.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (corpus, kind="cocategory", seeds=None, remove=None, lr=None, epochs=None, hidden=None, dropout=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    kind: &str,
    seeds: Option<Vec<u64>>,
    remove: Option<Vec<String>>,
    lr: Option<f64>,
    epochs: Option<usize>,
    hidden: Option<usize>,
    dropout: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = graph_kind(kind)?;
    let mut spec = ExperimentSpec::new(kind).removing(remove.unwrap_or_default());
    if let Some(s) = seeds {
        spec = spec.with_seeds(s);
    }
    spec.train = train_config(kind, lr, epochs, hidden, dropout, None)?;
    let report = py.detach(|| eval::run_experiment(&corpus.records, &corpus.taxonomy, &spec)).py_err()?;
    to_py(py, &report)
}

#[pyfunction]
fn accuracy(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    eval::accuracy(&pred, &truth).py_err()
}

/// Support-weighted mean of per-class F1.
#[pyfunction]
fn weighted_f1(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    eval::weighted_f1(&pred, &truth).py_err()
}

/// Agreement of a weak-label CSV with the corpus labels.
#[pyfunction]
fn audit<'py>(py: Python<'py>, path: PathBuf, corpus: &PyCorpus) -> PyResult<Bound<'py, PyAny>> {
    let set = weaklabel::WeakLabelSet::load(path, &corpus.taxonomy).py_err()?;
    to_py(py, &weaklabel::audit(&set, &corpus.records).py_err()?)
}

#[pyfunction]
#[pyo3(signature = (corpus, index, hints=false))]
fn build_prompt(corpus: &PyCorpus, index: usize, hints: bool) -> PyResult<String> {
    let spec = PromptSpec::new(&corpus.taxonomy, hints).py_err()?;
    let r = corpus
        .records
        .get(index)
        .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(index))?;
    Ok(llmjudge::build_prompt(&spec, r))
}

/// Class named in a model reply, or None.
#[pyfunction]
#[pyo3(signature = (response, taxonomy=None))]
fn parse_class(response: &str, taxonomy: Option<&PyTaxonomy>) -> Option<String> {
    let bundled;
    let t = match taxonomy {
        Some(t) => &t.inner,
        None => {
            bundled = corpus::Taxonomy::bundled();
            &bundled
        }
    };
    llmjudge::parse_class(response, t.classes()).map(|id| t.classes()[id].clone())
}

/// Classifies the corpus with `respond(prompt) -> str`, a Python callable
/// standing in for the chat model. Exceptions count as failed answers.
#[pyfunction]
#[pyo3(signature = (corpus, respond, hints=false, repetitions=llmjudge::DEFAULT_REPETITIONS, retries=0))]
fn judge<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    respond: Py<PyAny>,
    hints: bool,
    repetitions: usize,
    retries: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = PromptSpec::new(&corpus.taxonomy, hints).py_err()?;
    let transport = FnTransport(move |req: &llmjudge::ChatRequest| {
        Python::attach(|py| {
            respond
                .bind(py)
                .call1((req.prompt.as_str(),))
                .and_then(|r| r.extract::<String>())
                .map_err(|e| surveytax::Error::Transport(e.to_string()))
        })
    });
    let options = JudgeOptions { repetitions, max_retries: retries, retry_delay_ms: 0, concurrency: 1 };
    let run = py
        .detach(|| llmjudge::judge(&corpus.records, &corpus.taxonomy, &spec, &transport, &options))
        .py_err()?;
    to_py(py, &run)
}

#[pymodule]
#[pyo3(name = "surveytax")]
fn surveytax_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SurveytaxError", m.py().get_type::<SurveytaxError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTaxonomy>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrainRun>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_f1, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_class, m)?)?;
    m.add_function(wrap_pyfunction!(judge, m)?)?;
    Ok(())
}
