use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use surveytax::corpus::{build_subset, corpus_stats, read_records, write_records, PaperRecord, SubsetSpec, Taxonomy};
use surveytax::eval::{
    ablation_sweep, results_markdown, run_experiment, stats_markdown, write_results_csv, EvalReport, ExperimentSpec,
};
use surveytax::gcn::{
    forward_with_masks, load_checkpoint, save_checkpoint, train, write_embeddings_csv, write_projection_csv,
    CheckpointMeta, DropoutMasks, GcnModel, RunMetrics, TrainConfig, CHECKPOINT_VERSION,
};
use surveytax::graph::{build_graph, graph_stats, normalize, read_bundle, AttributedGraph, GraphKind, GraphOptions};
use surveytax::llmjudge::{judge, JudgeOptions, PromptSpec, ReplayTransport, Transport, TranscriptStore};
use surveytax::synthetic::{generate, SyntheticSpec};
use surveytax::text::{IdfMode, WindowSize};
use surveytax::weaklabel::{audit, generate_weak_labels, weak_labels_from_model, WeakLabelSet};
use surveytax::Error;

use crate::{Command, DataArgs, Failure, GraphArgs, HyperArgs, Idf, ModelSource, ReportArgs, Switch, TransportMode};

type CmdResult = Result<(), Failure>;

pub fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Ingest { data, out } => ingest(&data, &out),
        Command::Stats { data, out, json, top_k } => stats(&data, &out, json.as_deref(), top_k),
        Command::BuildGraph { data, graph, out } => build(&data, &graph, &out),
        Command::Train { data, graph, hyper, seed, out, metrics, bundle } => {
            train_one(&data, &graph, &hyper, seed, &out, metrics.as_deref(), bundle.as_deref())
        }
        Command::Run { data, graph, hyper, report } => run(&data, &graph, &hyper, &report),
        Command::Ablate { data, graph, hyper, removals, report } => ablate(&data, &graph, &hyper, &removals, &report),
        Command::ExportWeakLabels { source, out, audit } => export_weak_labels(&source, &out, audit.as_deref()),
        Command::ExportEmbeddings { source, out, projection } => export_embeddings(&source, &out, projection.as_deref()),
        Command::Judge {
            data,
            hints,
            transport,
            fixtures,
            repetitions,
            concurrency,
            retries,
            retry_delay_ms,
            template,
            temperature,
            out,
        } => {
            let options = JudgeOptions { repetitions, max_retries: retries, retry_delay_ms, concurrency };
            run_judge(&data, hints, transport, fixtures.as_deref(), options, template.as_deref(), temperature, &out)
        }
        Command::Synth { out, papers, classes, noise, seed } => {
            let spec = SyntheticSpec { papers, classes, category_noise: noise, seed, ..SyntheticSpec::default() };
            let records = generate(&spec, &Taxonomy::bundled())?;
            write_records(create(&out)?, &records)?;
            log::info!("wrote {} synthetic records to {}", records.len(), out.display());
            Ok(())
        }
    }
}

/// Opens `path` for writing, creating missing parent directories.
fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Fails with the path in the message when an input is missing.
fn require(path: &Path) -> Result<&Path, Failure> {
    if path.exists() {
        Ok(path)
    } else {
        let e = std::io::Error::new(std::io::ErrorKind::NotFound, format!("{}: no such file or directory", path.display()));
        Err(Failure::Domain(e.into()))
    }
}

fn load_taxonomy(path: Option<&Path>) -> Result<Taxonomy, Failure> {
    Ok(match path {
        Some(p) => Taxonomy::load(require(p)?)?,
        None => Taxonomy::bundled(),
    })
}

fn subset_spec(name: Option<&str>, data: &Path) -> Result<SubsetSpec, Failure> {
    match name {
        Some(n) => SubsetSpec::preset(n)
            .ok_or_else(|| Failure::Usage(format!("unknown subset {n:?} (jan24, nov23 or subset)"))),
        None => Ok(SubsetSpec::all(data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())),
    }
}

struct Loaded {
    taxonomy: Taxonomy,
    records: Vec<PaperRecord>,
    dataset: String,
}

fn load_corpus(data: &Path, taxonomy: Option<&Path>, subset: Option<&str>) -> Result<Loaded, Failure> {
    let taxonomy = load_taxonomy(taxonomy)?;
    let spec = subset_spec(subset, data)?;
    let all = read_records(require(data)?, &taxonomy)?;
    let records = build_subset(&all, &spec, &taxonomy)?;
    log::info!("{}: {} of {} records in {}", data.display(), records.len(), all.len(), spec.name);
    Ok(Loaded { taxonomy, records, dataset: spec.name })
}

fn load(data: &DataArgs) -> Result<Loaded, Failure> {
    load_corpus(&data.data, data.taxonomy.as_deref(), data.subset.as_deref())
}

fn graph_options(args: &GraphArgs) -> Result<GraphOptions, Failure> {
    let mut o = GraphOptions::default();
    if let Some(w) = args.window {
        o.window_size = WindowSize::new(w)?;
    }
    if let Some(m) = args.min_word_freq {
        o.min_word_freq = m;
    }
    if let Some(idf) = args.idf {
        o.idf = match idf {
            Idf::Raw => IdfMode::Raw,
            Idf::Smooth => IdfMode::Smooth,
        };
    }
    if let Some(a) = args.ablate_features {
        o.ablate_features = a;
    }
    Ok(o)
}

fn removed(args: &GraphArgs) -> BTreeSet<String> {
    args.remove.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn train_config(kind: GraphKind, hyper: &HyperArgs) -> Result<TrainConfig, Failure> {
    let mut c = TrainConfig::for_graph(kind);
    if let Some(v) = hyper.lr {
        c.learning_rate = v;
    }
    if let Some(v) = hyper.epochs {
        c.epochs = v;
    }
    if let Some(v) = hyper.hidden {
        c.hidden = v;
    }
    if let Some(v) = hyper.dropout {
        c.dropout_rate = v;
    }
    if let Some(v) = hyper.selection {
        c.selection = v;
    }
    c.validate()?;
    Ok(c)
}

fn make_graph(loaded: &Loaded, args: &GraphArgs) -> Result<AttributedGraph, Failure> {
    let graph = build_graph(args.graph, &loaded.records, &loaded.taxonomy, &removed(args), &graph_options(args)?)?;
    let s = graph_stats(&graph);
    log::info!(
        "{} graph: {} nodes, {} edges, {} features, {} classes",
        graph.kind.display_name(),
        s.nodes,
        s.edges,
        s.features,
        s.classes
    );
    Ok(graph)
}

fn ingest(data: &DataArgs, out: &Path) -> CmdResult {
    let loaded = load(data)?;
    let mut w = create(out)?;
    write_records(&mut w, &loaded.records)?;
    w.flush()?;
    Ok(())
}

fn stats(data: &DataArgs, out: &Path, json: Option<&Path>, top_k: usize) -> CmdResult {
    let loaded = load(data)?;
    let report = corpus_stats(&loaded.records, &loaded.taxonomy, top_k)?;
    let mut w = create(out)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = json {
        write_json(p, &report)?;
    }
    Ok(())
}

fn build(data: &DataArgs, args: &GraphArgs, out: &Path) -> CmdResult {
    let loaded = load(data)?;
    make_graph(&loaded, args)?.write_bundle(out)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    label: String,
    seed: u64,
    selected_epoch: usize,
    metrics: RunMetrics,
    config: &'a TrainConfig,
    loss_trace: &'a [f64],
    val_accuracy_trace: &'a [f64],
}

fn checkpoint_meta(config: &TrainConfig, graph: &AttributedGraph, taxonomy: &Taxonomy, epoch: usize) -> CheckpointMeta {
    CheckpointMeta {
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        graph_kind: graph.kind.to_string(),
        classes: graph.classes.clone(),
        taxonomy_fingerprint: taxonomy.fingerprint(),
        selected_epoch: epoch,
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    }
}

fn train_one(
    data: &DataArgs,
    args: &GraphArgs,
    hyper: &HyperArgs,
    seed: u64,
    out: &Path,
    metrics: Option<&Path>,
    bundle: Option<&Path>,
) -> CmdResult {
    let loaded = load(data)?;
    let graph = make_graph(&loaded, args)?;
    let config = train_config(args.graph, hyper)?.with_seed(seed);
    let run = train(&graph, &config)?;
    log::info!(
        "seed {seed}: test accuracy {:.4}, weighted F1 {:.4} (epoch {})",
        run.metrics.test_accuracy,
        run.metrics.test_weighted_f1,
        run.selected_epoch
    );
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    save_checkpoint(out, &run.model, &checkpoint_meta(&config, &graph, &loaded.taxonomy, run.selected_epoch))?;
    if let Some(p) = metrics {
        let summary = TrainSummary {
            label: surveytax::eval::edition_label(graph.kind, &graph.removed_categories),
            seed,
            selected_epoch: run.selected_epoch,
            metrics: run.metrics,
            config: &run.config,
            loss_trace: &run.loss_trace,
            val_accuracy_trace: &run.val_accuracy_trace,
        };
        write_json(p, &summary)?;
    }
    if let Some(dir) = bundle {
        graph.write_bundle(dir)?;
    }
    Ok(())
}

fn experiment(args: &GraphArgs, hyper: &HyperArgs, report: &ReportArgs) -> Result<ExperimentSpec, Failure> {
    Ok(ExperimentSpec {
        graph: args.graph,
        removed_categories: removed(args),
        seeds: report.seeds.0.clone(),
        train: train_config(args.graph, hyper)?,
        graph_options: graph_options(args)?,
    })
}

fn emit(reports: &[EvalReport], dataset: &str, args: &ReportArgs, single: bool) -> CmdResult {
    if single {
        write_json(&args.out, &reports[0])?;
    } else {
        write_json(&args.out, &reports)?;
    }
    if let Some(p) = &args.markdown {
        write_text(p, &format!("{}\n{}", results_markdown(reports), stats_markdown(dataset, reports)))?;
    }
    if let Some(p) = &args.csv {
        let mut w = create(p)?;
        write_results_csv(&mut w, reports)?;
        w.flush()?;
    }
    for r in reports {
        log::info!("{}: accuracy {}, weighted F1 {}", r.label, r.accuracy.percent(), r.weighted_f1.percent());
    }
    Ok(())
}

fn run(data: &DataArgs, args: &GraphArgs, hyper: &HyperArgs, report: &ReportArgs) -> CmdResult {
    let loaded = load(data)?;
    let spec = experiment(args, hyper, report)?;
    let result = run_experiment(&loaded.records, &loaded.taxonomy, &spec)?;
    emit(&[result], &loaded.dataset, report, true)
}

/// Parses `--removal` values against the categories present in `records`.
fn removal_sets(raw: &[String], records: &[PaperRecord]) -> Vec<BTreeSet<String>> {
    let universe: BTreeSet<String> = records.iter().flat_map(|r| r.categories.iter().cloned()).collect();
    if raw.is_empty() {
        let mut sets = vec![BTreeSet::new()];
        sets.extend(universe.iter().map(|c| BTreeSet::from([c.clone()])));
        sets.push(universe);
        return sets;
    }
    raw.iter()
        .map(|r| match r.trim() {
            "none" | "" => BTreeSet::new(),
            "all" => universe.clone(),
            list => list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        })
        .collect()
}

fn ablate(data: &DataArgs, args: &GraphArgs, hyper: &HyperArgs, raw: &[String], report: &ReportArgs) -> CmdResult {
    if !args.remove.is_empty() {
        return Err(Failure::Usage("ablate takes --removal, not --remove".into()));
    }
    let loaded = load(data)?;
    if args.graph != GraphKind::CoCategory {
        log::warn!("category removal only affects co-category graphs; every {} row will be identical", args.graph);
    }
    let base = experiment(args, hyper, report)?;
    let sets = removal_sets(raw, &loaded.records);
    let reports = ablation_sweep(&loaded.records, &loaded.taxonomy, &base, &sets)?;
    emit(&reports, &loaded.dataset, report, false)
}

struct Resolved {
    graph: AttributedGraph,
    model: GcnModel,
    seed: u64,
    records: Option<Vec<PaperRecord>>,
    run: Option<surveytax::gcn::TrainRun>,
}

/// Graph from a bundle or the corpus; model from a checkpoint or a new run.
fn resolve(source: &ModelSource) -> Result<Resolved, Failure> {
    let loaded = match &source.data {
        Some(d) => Some(load_corpus(d, source.taxonomy.as_deref(), source.subset.as_deref())?),
        None => None,
    };
    let graph = match (&source.bundle, &loaded) {
        (Some(dir), _) => read_bundle(require(dir)?)?,
        (None, Some(l)) => make_graph(l, &source.graph)?,
        (None, None) => return Err(Failure::Usage("either --data or --bundle is required".into())),
    };
    let records = loaded.map(|l| l.records);
    if let Some(path) = &source.checkpoint {
        let (model, meta) = load_checkpoint(require(path)?)?;
        if meta.classes != graph.classes || model.input_dim() != graph.features.cols() {
            return Err(Failure::Domain(Error::Validation(format!(
                "checkpoint {} does not fit this graph ({} classes, {} features; graph has {} and {})",
                path.display(),
                meta.classes.len(),
                model.input_dim(),
                graph.classes.len(),
                graph.features.cols()
            ))));
        }
        return Ok(Resolved { graph, model, seed: meta.config.seed, records, run: None });
    }
    let config = train_config(graph.kind, &source.hyper)?.with_seed(source.seed);
    let run = train(&graph, &config)?;
    log::info!("trained seed {}: test accuracy {:.4}", source.seed, run.metrics.test_accuracy);
    Ok(Resolved { model: run.model.clone(), graph, seed: source.seed, records, run: Some(run) })
}

fn export_weak_labels(source: &ModelSource, out: &Path, audit_path: Option<&Path>) -> CmdResult {
    let r = resolve(source)?;
    let set: WeakLabelSet = match &r.run {
        Some(run) => generate_weak_labels(run, &r.graph)?,
        None => weak_labels_from_model(&r.model, &r.graph, &surveytax::weaklabel::source_tag(&r.graph, r.seed))?,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    set.save(out)?;
    log::info!("wrote {} weak labels to {}", set.entries.len(), out.display());
    if let Some(p) = audit_path {
        let truth = r.records.as_ref().ok_or_else(|| Failure::Usage("--audit needs --data".into()))?;
        let report = audit(&set, truth)?;
        log::info!("weak-label agreement {:.4}", report.agreement);
        write_json(p, &report)?;
    }
    Ok(())
}

fn export_embeddings(source: &ModelSource, out: &Path, projection: Option<&Path>) -> CmdResult {
    let r = resolve(source)?;
    let pass = forward_with_masks(&r.model, &normalize(&r.graph), &r.graph.features.values, &DropoutMasks::none())?;
    let mut w = create(out)?;
    write_embeddings_csv(&mut w, &r.graph, &pass.hidden)?;
    w.flush()?;
    if let Some(p) = projection {
        let mut w = create(p)?;
        write_projection_csv(&mut w, &r.graph, &pass.hidden)?;
        w.flush()?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_judge(
    data: &DataArgs,
    hints: Switch,
    mode: TransportMode,
    fixtures: Option<&Path>,
    options: JudgeOptions,
    template: Option<&Path>,
    temperature: Option<f64>,
    out: &Path,
) -> CmdResult {
    let loaded = load(data)?;
    let hinted = hints == Switch::On;
    let spec = match template {
        Some(p) => {
            let text = std::fs::read_to_string(require(p)?)?;
            PromptSpec::with_template(&loaded.taxonomy, &text, hinted.then(|| loaded.taxonomy.hints().clone()))?
        }
        None => PromptSpec::new(&loaded.taxonomy, hinted)?,
    };
    let store = fixtures.map(|d| TranscriptStore::new(PathBuf::from(d)));
    let run = match mode {
        TransportMode::Replay => {
            let store = store.ok_or_else(|| Failure::Usage("--transport replay needs --fixtures".into()))?;
            if !store.dir().is_dir() {
                return Err(Failure::Domain(Error::Config(format!(
                    "fixture directory {} does not exist",
                    store.dir().display()
                ))));
            }
            judge(&loaded.records, &loaded.taxonomy, &spec, &ReplayTransport::new(store), &options)?
        }
        TransportMode::Live => {
            let mut http = surveytax::llmjudge::HttpTransport::from_env()?;
            http.temperature = temperature;
            log::info!("querying {}", http.endpoint());
            let transport: &dyn Transport = &http;
            let run = judge(&loaded.records, &loaded.taxonomy, &spec, transport, &options)?;
            if let Some(store) = &store {
                std::fs::create_dir_all(store.dir())?;
                run.record(store)?;
                log::info!("recorded {} transcripts in {}", run.transcripts.len(), store.dir().display());
            }
            run
        }
    };
    let failures: usize = run.per_repetition.iter().map(|m| m.failures).sum();
    log::info!(
        "hints {}: accuracy {}, weighted F1 {}, {failures} failed answers",
        if hinted { "on" } else { "off" },
        run.accuracy.percent(),
        run.weighted_f1.percent()
    );
    write_json(out, &run)
}
