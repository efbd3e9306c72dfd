use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MeanStd;
use crate::corpus::{PaperRecord, Taxonomy};
use crate::error::{Error, Result};
use crate::gcn::{train_with, NodeMasks, TrainConfig};
use crate::eval::SplitSpec;
use crate::graph::{build_graph, graph_stats, normalize, GraphKind, GraphOptions, GraphStats};

/// Bumped whenever a field of [`EvalReport`] changes meaning or is removed.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One experiment: a graph type, a category ablation and a seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub graph: GraphKind,
    pub removed_categories: BTreeSet<String>,
    pub seeds: Vec<u64>,
    /// `seed` is overwritten per run.
    pub train: TrainConfig,
    pub graph_options: GraphOptions,
}

impl ExperimentSpec {
    /// Default hyper-parameters for `graph`, seeds 0 to 4, no ablation.
    pub fn new(graph: GraphKind) -> Self {
        Self {
            graph,
            removed_categories: BTreeSet::new(),
            seeds: (0..5).collect(),
            train: TrainConfig::for_graph(graph),
            graph_options: GraphOptions::default(),
        }
    }

    pub fn removing<S: Into<String>>(mut self, categories: impl IntoIterator<Item = S>) -> Self {
        self.removed_categories = categories.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds = seeds.into_iter().collect();
        self
    }

    /// Row label in the style `Co-category (Rm cs.AI, cs.CL)`, removals sorted.
    pub fn label(&self) -> String {
        edition_label(self.graph, &self.removed_categories)
    }
}

pub fn edition_label(graph: GraphKind, removed: &BTreeSet<String>) -> String {
    if removed.is_empty() {
        graph.display_name().to_string()
    } else {
        let list: Vec<&str> = removed.iter().map(String::as_str).collect();
        format!("{} (Rm {})", graph.display_name(), list.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub val_accuracy: f64,
    pub selected_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub label: String,
    pub graph: GraphKind,
    pub removed_categories: BTreeSet<String>,
    pub records: usize,
    pub graph_stats: GraphStats,
    pub per_seed: Vec<SeedResult>,
    pub accuracy: MeanStd,
    pub weighted_f1: MeanStd,
    pub config: TrainConfig,
    pub graph_options: GraphOptions,
}

/// Builds the graph, then trains and tests once per seed (seeds in parallel).
pub fn run_experiment(
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    spec: &ExperimentSpec,
) -> Result<EvalReport> {
    if spec.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    spec.train.validate()?;
    let graph = build_graph(spec.graph, records, taxonomy, &spec.removed_categories, &spec.graph_options)?;
    let adj = normalize(&graph);
    let per_seed = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let config = spec.train.clone().with_seed(seed);
            let masks = NodeMasks::for_graph(&graph, &SplitSpec::with_seed(seed))?;
            let run = train_with(&graph, &adj, &config, masks)?;
            log::info!(
                "{} seed {seed}: test accuracy {:.4}, weighted F1 {:.4} (epoch {})",
                spec.label(),
                run.metrics.test_accuracy,
                run.metrics.test_weighted_f1,
                run.selected_epoch
            );
            Ok(SeedResult {
                seed,
                accuracy: run.metrics.test_accuracy,
                weighted_f1: run.metrics.test_weighted_f1,
                val_accuracy: run.metrics.val_accuracy,
                selected_epoch: run.selected_epoch,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = per_seed.iter().map(|s| s.accuracy).collect();
    let f1: Vec<f64> = per_seed.iter().map(|s| s.weighted_f1).collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        label: spec.label(),
        graph: spec.graph,
        removed_categories: spec.removed_categories.clone(),
        records: records.len(),
        graph_stats: graph_stats(&graph),
        per_seed,
        accuracy: MeanStd::of(&acc),
        weighted_f1: MeanStd::of(&f1),
        config: spec.train.clone(),
        graph_options: spec.graph_options.clone(),
    })
}

/// Runs `base` once per removal set, in order.
pub fn ablation_sweep(
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    base: &ExperimentSpec,
    removals: &[BTreeSet<String>],
) -> Result<Vec<EvalReport>> {
    removals
        .iter()
        .map(|removed| {
            let spec = ExperimentSpec { removed_categories: removed.clone(), ..base.clone() };
            run_experiment(records, taxonomy, &spec)
        })
        .collect()
}

/// `| Graph | Accuracy | Weighted F1 |` with `mean (std)` percentages.
pub fn results_markdown(reports: &[EvalReport]) -> String {
    let mut s = String::from("| Graph | Accuracy | Weighted F1 |\n|---|---|---|\n");
    for r in reports {
        let _ = writeln!(s, "| {} | {} | {} |", r.label, r.accuracy.percent(), r.weighted_f1.percent());
    }
    s
}

/// `| Dataset | Graph | Nodes | Edges | Directed edges | Features | Classes |`.
pub fn stats_markdown(dataset: &str, reports: &[EvalReport]) -> String {
    let mut s = String::from("| Dataset | Graph | Nodes | Edges | Directed edges | Features | Classes |\n|---|---|---|---|---|---|---|\n");
    for r in reports {
        let g = &r.graph_stats;
        let _ = writeln!(
            s,
            "| {dataset} | {} | {} | {} | {} | {} | {} |",
            r.label, g.nodes, g.edges, g.directed_edges, g.features, g.classes
        );
    }
    s
}

#[derive(Serialize)]
struct CsvRow<'a> {
    label: &'a str,
    graph: String,
    removed: String,
    seeds: usize,
    accuracy_mean: f64,
    accuracy_std: f64,
    weighted_f1_mean: f64,
    weighted_f1_std: f64,
    nodes: usize,
    edges: usize,
    directed_edges: usize,
    features: usize,
    classes: usize,
}

/// One row per report; metrics as fractions in `[0, 1]`.
pub fn write_results_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            label: &r.label,
            graph: r.graph.to_string(),
            removed: r.removed_categories.iter().cloned().collect::<Vec<_>>().join(";"),
            seeds: r.per_seed.len(),
            accuracy_mean: r.accuracy.mean,
            accuracy_std: r.accuracy.std,
            weighted_f1_mean: r.weighted_f1.mean,
            weighted_f1_std: r.weighted_f1.std,
            nodes: r.graph_stats.nodes,
            edges: r.graph_stats.edges,
            directed_edges: r.graph_stats.directed_edges,
            features: r.graph_stats.features,
            classes: r.graph_stats.classes,
        })?;
    }
    w.flush()?;
    Ok(())
}
