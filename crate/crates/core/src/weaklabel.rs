//! GCN weak labels: generation, the CSV exchange format, and audits against
//! ground truth.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{PaperRecord, Taxonomy};
use crate::error::{Error, Result};
use crate::gcn::{predict, GcnModel, TrainRun};
use crate::graph::{normalize, AttributedGraph};

pub const CSV_HEADER: [&str; 4] = ["paper_id", "predicted_class", "confidence", "source"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabel {
    pub paper_id: String,
    pub predicted_class: String,
    pub confidence: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabelSet {
    pub entries: Vec<WeakLabel>,
    pub generated_on: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabelMeta {
    pub generated_on: NaiveDate,
    pub entries: usize,
    pub sources: Vec<String>,
}

/// `gcn-<graph>-seed<seed>`.
pub fn source_tag(graph: &AttributedGraph, seed: u64) -> String {
    format!("gcn-{}-seed{seed}", graph.kind)
}

/// Predictions of `model` for every paper node of `graph`.
pub fn weak_labels_from_model(model: &GcnModel, graph: &AttributedGraph, source: &str) -> Result<WeakLabelSet> {
    let preds = predict(model, &normalize(graph), &graph.features.values)?;
    let entries = graph
        .paper_nodes()
        .into_iter()
        .map(|i| WeakLabel {
            paper_id: graph.node_ids[i].clone(),
            predicted_class: graph.classes[preds.classes[i]].clone(),
            confidence: preds.confidence[i],
            source: source.to_string(),
        })
        .collect();
    Ok(WeakLabelSet { entries, generated_on: chrono::Local::now().date_naive() })
}

/// Weak labels for all papers (every split) from the run's selected weights.
pub fn generate_weak_labels(run: &TrainRun, graph: &AttributedGraph) -> Result<WeakLabelSet> {
    if run.loss_trace.is_empty() {
        return Err(Error::validation("training run has no completed epochs"));
    }
    weak_labels_from_model(&run.model, graph, &source_tag(graph, run.config.seed))
}

impl WeakLabelSet {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for e in &self.entries {
            w.write_record([
                e.paper_id.as_str(),
                e.predicted_class.as_str(),
                &e.confidence.to_string(),
                e.source.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn meta(&self) -> WeakLabelMeta {
        let mut sources: Vec<String> = self.entries.iter().map(|e| e.source.clone()).collect();
        sources.sort();
        sources.dedup();
        WeakLabelMeta { generated_on: self.generated_on, entries: self.entries.len(), sources }
    }

    /// Writes `path` and the metadata sidecar `path.meta.json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        fs::write(path, buf)?;
        fs::write(meta_path(path), serde_json::to_string_pretty(&self.meta())? + "\n")?;
        Ok(())
    }

    /// Loads `path`; `generated_on` comes from the sidecar when present,
    /// otherwise today.
    pub fn load(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Self> {
        let path = path.as_ref();
        let entries = read_weak_labels(fs::File::open(path)?, taxonomy)
            .map_err(|e| match e {
                Error::Validation(m) => Error::format(path, m),
                other => other,
            })?;
        let generated_on = match fs::read_to_string(meta_path(path)) {
            Ok(text) => serde_json::from_str::<WeakLabelMeta>(&text)?.generated_on,
            Err(_) => chrono::Local::now().date_naive(),
        };
        Ok(Self { entries, generated_on })
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Parses and validates weak-label CSV.
pub fn read_weak_labels<R: Read>(input: R, taxonomy: &Taxonomy) -> Result<Vec<WeakLabel>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::validation(format!("expected header {}, got {}", CSV_HEADER.join(","), header.join(","))));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (row, rec) in reader.deserialize::<WeakLabel>().enumerate() {
        let e = rec?;
        let line = row + 2;
        if !taxonomy.contains(&e.predicted_class) {
            return Err(Error::validation(format!("line {line}: unknown class {:?}", e.predicted_class)));
        }
        if !(e.confidence > 0.0 && e.confidence <= 1.0) {
            return Err(Error::validation(format!("line {line}: confidence {} not in (0, 1]", e.confidence)));
        }
        if !seen.insert(e.paper_id.clone()) {
            return Err(Error::validation(format!("line {line}: duplicate paper_id {:?}", e.paper_id)));
        }
        out.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub papers: usize,
    pub agreement: f64,
    pub noise_ratio: f64,
    /// `confusion[truth][predicted]` counts.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
    /// Weak-label entries whose paper is not among the audited records.
    pub unmatched: usize,
}

/// Compares weak labels with the labels of `truth`.
pub fn audit(weak: &WeakLabelSet, truth: &[PaperRecord]) -> Result<AuditReport> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("no records to audit against".into()));
    }
    let by_id: HashMap<&str, &WeakLabel> = weak.entries.iter().map(|e| (e.paper_id.as_str(), e)).collect();
    let missing: Vec<&str> = truth
        .iter()
        .map(|r| r.paper_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::validation(format!("no weak label for papers: {}", missing.join(", "))));
    }
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut agree = 0usize;
    for r in truth {
        let e = by_id[r.paper_id.as_str()];
        if e.predicted_class == r.taxonomy_label {
            agree += 1;
        }
        *confusion
            .entry(r.taxonomy_label.clone())
            .or_default()
            .entry(e.predicted_class.clone())
            .or_default() += 1;
    }
    let truth_ids: HashSet<&str> = truth.iter().map(|r| r.paper_id.as_str()).collect();
    let agreement = agree as f64 / truth.len() as f64;
    Ok(AuditReport {
        papers: truth.len(),
        agreement,
        noise_ratio: 1.0 - agreement,
        confusion,
        unmatched: weak.entries.iter().filter(|e| !truth_ids.contains(e.paper_id.as_str())).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taxonomy() -> Taxonomy {
        Taxonomy::new(["A", "B"]).unwrap()
    }

    fn set(labels: &[(&str, &str)]) -> WeakLabelSet {
        WeakLabelSet {
            entries: labels
                .iter()
                .map(|(id, c)| WeakLabel {
                    paper_id: id.to_string(),
                    predicted_class: c.to_string(),
                    confidence: 0.75,
                    source: "test".into(),
                })
                .collect(),
            generated_on: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut s = set(&[("p1", "A"), ("p,2", "B")]);
        s.entries[1].confidence = 0.1 + 0.2;
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("paper_id,predicted_class,confidence,source\n"));
        assert_eq!(read_weak_labels(buf.as_slice(), &taxonomy()).unwrap(), s.entries);
    }

    #[test]
    fn rejects_bad_rows() {
        let t = taxonomy();
        let bad_class = "paper_id,predicted_class,confidence,source\np1,Z,0.5,x\n";
        assert!(read_weak_labels(bad_class.as_bytes(), &t).is_err());
        let bad_conf = "paper_id,predicted_class,confidence,source\np1,A,0,x\n";
        assert!(read_weak_labels(bad_conf.as_bytes(), &t).is_err());
        let dup = "paper_id,predicted_class,confidence,source\np1,A,0.5,x\np1,B,0.5,x\n";
        assert!(read_weak_labels(dup.as_bytes(), &t).is_err());
        let header = "id,class,confidence,source\n";
        assert!(read_weak_labels(header.as_bytes(), &t).is_err());
    }
}
