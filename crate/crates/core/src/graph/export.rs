use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributedGraph, CsrMatrix, GraphKind, NodeRole};
use crate::error::{Error, Result};
use crate::text::FeatureMatrix;

pub const EDGES_FILE: &str = "edges.tsv";
pub const NODES_FILE: &str = "nodes.csv";
pub const FEATURES_STEM: &str = "features";
pub const META_FILE: &str = "graph.json";

#[derive(Debug, Serialize, Deserialize)]
struct GraphMeta {
    kind: GraphKind,
    classes: Vec<String>,
    removed_categories: BTreeSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow {
    node_id: String,
    role: NodeRole,
    label: String,
}

impl AttributedGraph {
    /// Edge list as TSV with header `src_id\tdst_id\tweight`, one line per
    /// undirected edge.
    pub fn write_edges_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "src_id\tdst_id\tweight")?;
        for (i, j, w) in self.edges() {
            writeln!(out, "{}\t{}\t{}", self.node_ids[i], self.node_ids[j], w)?;
        }
        Ok(())
    }

    /// Node table CSV with header `node_id,role,label`.
    pub fn write_nodes_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.n() {
            w.serialize(NodeRow {
                node_id: self.node_ids[i].clone(),
                role: self.roles[i],
                label: self.classes[self.labels[i]].clone(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes edges, nodes, binary features and a `graph.json` descriptor
    /// into `dir`.
    pub fn write_bundle(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_edges_tsv(std::io::BufWriter::new(std::fs::File::create(dir.join(EDGES_FILE))?))?;
        self.write_nodes_csv(std::fs::File::create(dir.join(NODES_FILE))?)?;
        self.features.write_binary(dir.join(FEATURES_STEM), &self.node_ids)?;
        let meta = GraphMeta {
            kind: self.kind,
            classes: self.classes.clone(),
            removed_categories: self.removed_categories.clone(),
        };
        serde_json::to_writer_pretty(std::fs::File::create(dir.join(META_FILE))?, &meta)?;
        Ok(())
    }
}

/// Reads a directory produced by [`AttributedGraph::write_bundle`].
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<AttributedGraph> {
    let dir = dir.as_ref();
    let meta: GraphMeta = serde_json::from_reader(std::fs::File::open(dir.join(META_FILE))?)?;
    let class_index: HashMap<&str, usize> =
        meta.classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let nodes_path = dir.join(NODES_FILE);
    let mut node_ids = Vec::new();
    let mut roles = Vec::new();
    let mut labels = Vec::new();
    for row in csv::Reader::from_path(&nodes_path)?.deserialize() {
        let row: NodeRow = row?;
        let label = *class_index
            .get(row.label.as_str())
            .ok_or_else(|| Error::format(&nodes_path, format!("unknown label {:?}", row.label)))?;
        node_ids.push(row.node_id);
        roles.push(row.role);
        labels.push(label);
    }
    let index: HashMap<&str, usize> = node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    let edges_path = dir.join(EDGES_FILE);
    let mut edges = Vec::new();
    let reader = std::io::BufReader::new(std::fs::File::open(&edges_path)?);
    for (n, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let bad = |m: &str| Error::format(&edges_path, format!("line {}: {m}", n + 1));
        let mut parts = line.split('\t');
        let (Some(src), Some(dst), Some(w), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let i = *index.get(src).ok_or_else(|| bad("unknown src_id"))?;
        let j = *index.get(dst).ok_or_else(|| bad("unknown dst_id"))?;
        let w: f64 = w.parse().map_err(|_| bad("weight is not a number"))?;
        edges.push((i, j, w));
    }

    let (features, feature_ids) = FeatureMatrix::read_binary(dir.join(FEATURES_STEM))?;
    if feature_ids != node_ids {
        return Err(Error::format(dir, "feature row ids do not match node table"));
    }
    let graph = AttributedGraph {
        kind: meta.kind,
        adjacency: CsrMatrix::symmetric(node_ids.len(), edges)?,
        features,
        labels,
        roles,
        node_ids,
        classes: meta.classes,
        removed_categories: meta.removed_categories,
    };
    graph.validate()?;
    Ok(graph)
}
