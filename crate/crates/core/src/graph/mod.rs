//! Attributed graph construction (text, co-author, co-category), symmetric
//! normalization, and graph statistics.

mod builders;
mod export;
mod sparse;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use builders::{
    build_co_author_graph, build_co_category_graph, build_graph, build_text_graph,
    normalize_author, GraphOptions, WORD_CLASS,
};
pub use export::read_bundle;
pub use sparse::CsrMatrix;

use crate::corpus::ClassId;
use crate::error::{Error, Result};
use crate::text::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Text,
    CoAuthor,
    CoCategory,
}

impl GraphKind {
    pub const ALL: [GraphKind; 3] = [GraphKind::Text, GraphKind::CoAuthor, GraphKind::CoCategory];

    /// Adam learning rate used for this graph type unless overridden.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            GraphKind::Text => 2e-2,
            GraphKind::CoAuthor | GraphKind::CoCategory => 1e-2,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            GraphKind::Text => "Text",
            GraphKind::CoAuthor => "Co-author",
            GraphKind::CoCategory => "Co-category",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Text => "text",
            GraphKind::CoAuthor => "coauthor",
            GraphKind::CoCategory => "cocategory",
        })
    }
}

impl FromStr for GraphKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "text" => Ok(GraphKind::Text),
            "coauthor" => Ok(GraphKind::CoAuthor),
            "cocategory" => Ok(GraphKind::CoCategory),
            _ => Err(Error::Config(format!(
                "unknown graph kind {s:?} (expected text, coauthor or cocategory)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Paper,
    Word,
}

/// Symmetric weighted adjacency (no stored self-loops), node features,
/// labels and roles.
///
/// `labels[i]` indexes `classes`. Paper graphs use the taxonomy classes present
/// in the corpus in taxonomy order; the text graph appends [`WORD_CLASS`] for
/// word nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    pub kind: GraphKind,
    pub adjacency: CsrMatrix,
    pub features: FeatureMatrix,
    pub labels: Vec<ClassId>,
    pub roles: Vec<NodeRole>,
    pub node_ids: Vec<String>,
    pub classes: Vec<String>,
    pub removed_categories: BTreeSet<String>,
}

impl AttributedGraph {
    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    /// Indices of paper nodes, in node order.
    pub fn paper_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i] == NodeRole::Paper).collect()
    }

    /// Number of classes a model must predict over (paper classes only).
    pub fn paper_class_count(&self) -> usize {
        match self.kind {
            GraphKind::Text => self.classes.len() - 1,
            _ => self.classes.len(),
        }
    }

    /// Every undirected edge once as `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().filter(|&(i, j, _)| i < j)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let fail = |m: String| Err(Error::validation(m));
        if self.adjacency.rows() != n || self.adjacency.cols() != n {
            return fail(format!("adjacency is {}x{}, expected {n}x{n}", self.adjacency.rows(), self.adjacency.cols()));
        }
        if self.features.rows() != n {
            return fail(format!("feature matrix has {} rows for {n} nodes", self.features.rows()));
        }
        if self.labels.len() != n || self.roles.len() != n {
            return fail("labels/roles length differs from node count".into());
        }
        for (i, j, w) in self.adjacency.iter() {
            if i == j {
                return fail(format!("self-loop stored on node {i}"));
            }
            if !(w.is_finite() && w > 0.0) {
                return fail(format!("edge ({i}, {j}) has weight {w}"));
            }
            if self.adjacency.get(j, i) != w {
                return fail(format!("adjacency not symmetric at ({i}, {j})"));
            }
        }
        let word = self.classes.iter().position(|c| c == WORD_CLASS);
        for (i, (&label, &role)) in self.labels.iter().zip(&self.roles).enumerate() {
            if label >= self.classes.len() {
                return fail(format!("node {i} label {label} out of range"));
            }
            let is_word_label = Some(label) == word;
            if (role == NodeRole::Word) != is_word_label {
                return fail(format!("node {i} role {role:?} inconsistent with label"));
            }
        }
        Ok(())
    }
}

/// Symmetrically normalized adjacency with self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub matrix: CsrMatrix,
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃_ii = 1 + Σ_j A_ij` (weighted degree).
pub fn normalize(graph: &AttributedGraph) -> NormalizedAdjacency {
    normalize_adjacency(&graph.adjacency)
}

pub fn normalize_adjacency(adjacency: &CsrMatrix) -> NormalizedAdjacency {
    let n = adjacency.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|r| 1.0 / (adjacency.row_sum(r) + 1.0).sqrt())
        .collect();
    let with_loops = adjacency
        .iter()
        .chain((0..n).map(|i| (i, i, 1.0)))
        .collect::<Vec<_>>();
    // Product of the two scales first so that entry (i, j) and (j, i) are
    // bit-identical.
    let scaled = with_loops
        .into_iter()
        .map(|(i, j, a)| (i, j, a * (inv_sqrt[i] * inv_sqrt[j])));
    NormalizedAdjacency {
        matrix: CsrMatrix::from_triplets(n, n, scaled).expect("indices are in range"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    /// Unordered node pairs.
    pub edges: usize,
    /// Directed adjacency entries, twice `edges`.
    pub directed_edges: usize,
    pub features: usize,
    pub classes: usize,
}

pub fn graph_stats(graph: &AttributedGraph) -> GraphStats {
    let directed = graph.adjacency.nnz();
    let classes: HashSet<ClassId> = graph.labels.iter().copied().collect();
    GraphStats {
        nodes: graph.n(),
        edges: directed / 2,
        directed_edges: directed,
        features: graph.features.cols(),
        classes: classes.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let a = CsrMatrix::from_triplets(1, 1, []).unwrap();
        assert_eq!(normalize_adjacency(&a).matrix.to_dense()[[0, 0]], 1.0);
    }

    #[test]
    fn unit_edge() {
        let a = CsrMatrix::symmetric(2, [(0, 1, 1.0)]).unwrap();
        let m = normalize_adjacency(&a).matrix.to_dense();
        for v in m.iter() {
            assert!(close(*v, 0.5));
        }
    }

    #[test]
    fn weighted_edge() {
        let a = CsrMatrix::symmetric(2, [(0, 1, 3.0)]).unwrap();
        let m = normalize_adjacency(&a).matrix.to_dense();
        assert!(close(m[[0, 0]], 0.25) && close(m[[1, 1]], 0.25));
        assert!(close(m[[0, 1]], 0.75) && close(m[[1, 0]], 0.75));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("co-category".parse::<GraphKind>().unwrap(), GraphKind::CoCategory);
        assert_eq!("coauthor".parse::<GraphKind>().unwrap(), GraphKind::CoAuthor);
        assert!("citation".parse::<GraphKind>().is_err());
        for k in GraphKind::ALL {
            assert_eq!(k.to_string().parse::<GraphKind>().unwrap(), k);
        }
    }
}
