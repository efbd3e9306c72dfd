use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{AttributedGraph, CsrMatrix, GraphKind, NodeRole};
use crate::corpus::{ClassId, PaperRecord, Taxonomy};
use crate::error::{Error, Result};
use crate::text::{
    clean_tokenize, paper_features_masked, sliding_window_stats, tfidf_over, FeatureMatrix,
    IdfMode, Vocabulary, WindowSize,
};

/// Label given to every word node of a text graph.
pub const WORD_CLASS: &str = "<word>";

/// Knobs shared by the graph builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    /// Co-occurrence window for word-word PMI edges.
    pub window_size: WindowSize,
    /// Words occurring fewer times than this in the whole corpus are dropped
    /// from the text graph.
    pub min_word_freq: usize,
    pub idf: IdfMode,
    /// Whether removed categories are also zeroed in the one-hot feature block
    /// of co-category graphs. When false only edges change.
    pub ablate_features: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            window_size: WindowSize::default(),
            min_word_freq: 1,
            idf: IdfMode::Raw,
            ablate_features: true,
        }
    }
}

pub fn build_graph(
    kind: GraphKind,
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    removed_categories: &BTreeSet<String>,
    options: &GraphOptions,
) -> Result<AttributedGraph> {
    match kind {
        GraphKind::Text => build_text_graph(records, taxonomy, options),
        GraphKind::CoAuthor => build_co_author_graph(records, taxonomy, options),
        GraphKind::CoCategory => {
            build_co_category_graph(records, taxonomy, removed_categories, options)
        }
    }
}

/// Classes present in `records`, in taxonomy order, and each record's index
/// into that list.
fn label_space(records: &[PaperRecord], taxonomy: &Taxonomy) -> Result<(Vec<String>, Vec<ClassId>)> {
    let mut ids = Vec::with_capacity(records.len());
    for r in records {
        ids.push(taxonomy.id(&r.taxonomy_label).ok_or_else(|| {
            Error::validation(format!("unknown taxonomy label {:?}", r.taxonomy_label))
        })?);
    }
    let present: BTreeSet<ClassId> = ids.iter().copied().collect();
    let remap: HashMap<ClassId, ClassId> = present.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let classes = present.iter().map(|&t| taxonomy.classes()[t].clone()).collect();
    Ok((classes, ids.iter().map(|t| remap[t]).collect()))
}

fn non_empty(records: &[PaperRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyInput("graph builders need at least one record".into()));
    }
    Ok(())
}

/// Heterogeneous paper-word graph.
///
/// Papers come first in corpus order, then vocabulary tokens in lexicographic
/// order. Paper-word weights are TF-IDF over each paper's title and summary;
/// word-word weights are positive PMI over sliding windows. Features are all
/// ones, one column per node.
pub fn build_text_graph(
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    options: &GraphOptions,
) -> Result<AttributedGraph> {
    non_empty(records)?;
    let (mut classes, mut labels) = label_space(records, taxonomy)?;

    let raw_docs: Vec<Vec<String>> = records.iter().map(|r| clean_tokenize(&r.text())).collect();
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for tok in raw_docs.iter().flatten() {
        *freq.entry(tok).or_default() += 1;
    }
    let docs: Vec<Vec<String>> = raw_docs
        .iter()
        .map(|d| {
            d.iter()
                .filter(|t| freq[t.as_str()] >= options.min_word_freq)
                .cloned()
                .collect()
        })
        .collect();
    let vocabulary = Vocabulary::from_docs(&docs);
    if vocabulary.is_empty() {
        return Err(Error::EmptyInput("text graph vocabulary is empty".into()));
    }

    let papers = records.len();
    let n = papers + vocabulary.len();
    let tfidf = tfidf_over(&docs, vocabulary.clone(), options.idf)?;
    let mut edges = Vec::new();
    for ((p, w), &v) in tfidf.values.indexed_iter() {
        if v > 0.0 {
            edges.push((p, papers + w, v));
        }
    }
    let stats = sliding_window_stats(&docs, options.window_size);
    let stats_vocab = stats.vocabulary();
    for (i, j, pmi) in stats.positive_pmi_edges() {
        let a = vocabulary.get(stats_vocab.token(i).unwrap()).unwrap();
        let b = vocabulary.get(stats_vocab.token(j).unwrap()).unwrap();
        edges.push((papers + a, papers + b, pmi));
    }

    let word_class = classes.len();
    classes.push(WORD_CLASS.to_string());
    labels.extend(std::iter::repeat_n(word_class, vocabulary.len()));
    let mut roles = vec![NodeRole::Paper; papers];
    roles.extend(std::iter::repeat_n(NodeRole::Word, vocabulary.len()));
    let mut node_ids: Vec<String> = records.iter().map(|r| r.paper_id.clone()).collect();
    node_ids.extend(vocabulary.tokens().iter().map(|t| format!("word:{t}")));

    Ok(AttributedGraph {
        kind: GraphKind::Text,
        adjacency: CsrMatrix::symmetric(n, edges)?,
        features: FeatureMatrix::ones(n, n),
        labels,
        roles,
        node_ids,
        classes,
        removed_categories: BTreeSet::new(),
    })
}

/// Lowercases, strips punctuation and collapses whitespace.
pub fn normalize_author(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Unit-weight edges between every pair of papers sharing a key.
fn shared_key_edges(keys_per_paper: impl Iterator<Item = Vec<String>>) -> Vec<(usize, usize, f64)> {
    let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (paper, keys) in keys_per_paper.enumerate() {
        let unique: BTreeSet<String> = keys.into_iter().filter(|k| !k.is_empty()).collect();
        for key in unique {
            by_key.entry(key).or_default().push(paper);
        }
    }
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for papers in by_key.values() {
        for (a, &i) in papers.iter().enumerate() {
            for &j in &papers[a + 1..] {
                pairs.insert((i, j));
            }
        }
    }
    pairs.into_iter().map(|(i, j)| (i, j, 1.0)).collect()
}

fn paper_graph(
    kind: GraphKind,
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    edges: Vec<(usize, usize, f64)>,
    features: FeatureMatrix,
    removed_categories: BTreeSet<String>,
) -> Result<AttributedGraph> {
    let (classes, labels) = label_space(records, taxonomy)?;
    Ok(AttributedGraph {
        kind,
        adjacency: CsrMatrix::symmetric(records.len(), edges)?,
        features,
        labels,
        roles: vec![NodeRole::Paper; records.len()],
        node_ids: records.iter().map(|r| r.paper_id.clone()).collect(),
        classes,
        removed_categories,
    })
}

/// Papers linked when they share at least one (normalized) author name.
pub fn build_co_author_graph(
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    options: &GraphOptions,
) -> Result<AttributedGraph> {
    non_empty(records)?;
    let edges = shared_key_edges(
        records.iter().map(|r| r.authors.iter().map(|a| normalize_author(a)).collect()),
    );
    let features = paper_features_masked(records, options.idf, &HashSet::new())?;
    paper_graph(GraphKind::CoAuthor, records, taxonomy, edges, features, BTreeSet::new())
}

/// Papers linked when they share at least one arXiv category outside
/// `removed_categories`.
pub fn build_co_category_graph(
    records: &[PaperRecord],
    taxonomy: &Taxonomy,
    removed_categories: &BTreeSet<String>,
    options: &GraphOptions,
) -> Result<AttributedGraph> {
    non_empty(records)?;
    let edges = shared_key_edges(records.iter().map(|r| {
        r.categories
            .iter()
            .filter(|c| !removed_categories.contains(*c))
            .cloned()
            .collect()
    }));
    let masked: HashSet<&str> = if options.ablate_features {
        removed_categories.iter().map(String::as_str).collect()
    } else {
        HashSet::new()
    };
    let features = paper_features_masked(records, options.idf, &masked)?;
    paper_graph(
        GraphKind::CoCategory,
        records,
        taxonomy,
        edges,
        features,
        removed_categories.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_date;
    use crate::graph::graph_stats;

    fn rec(id: &str, text: &str, authors: &[&str], cats: &[&str], label: &str) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            title: text.into(),
            authors: authors.iter().map(|a| a.to_string()).collect(),
            release_date: parse_date("2023-06-01").unwrap(),
            links: vec![],
            categories: cats.iter().map(|c| c.to_string()).collect(),
            summary: String::new(),
            taxonomy_label: label.into(),
        }
    }

    fn tax() -> Taxonomy {
        Taxonomy::new(["Law", "Finance", "Science"]).unwrap()
    }

    #[test]
    fn text_graph_two_disjoint_papers() {
        let recs = [rec("p1", "alpha", &[], &["cs.CL"], "Law"), rec("p2", "beta", &[], &["cs.CL"], "Science")];
        let g = build_text_graph(&recs, &tax(), &GraphOptions::default()).unwrap();
        g.validate().unwrap();
        assert_eq!(g.n(), 4);
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges.len(), 2);
        assert!(edges.iter().all(|&(i, j, _)| i < 2 && j >= 2));
        assert_eq!(g.node_ids, ["p1", "p2", "word:alpha", "word:beta"]);
        assert_eq!(g.classes, ["Law", "Science", WORD_CLASS]);
        assert_eq!(g.labels, [0, 1, 2, 2]);
        assert_eq!(g.features.cols(), 4);
        assert!(g.features.values.iter().all(|&v| v == 1.0));
        assert_eq!(graph_stats(&g).classes, 3);
    }

    #[test]
    fn text_graph_single_token_has_no_edges() {
        let g = build_text_graph(&[rec("p", "alpha", &[], &["cs.CL"], "Law")], &tax(), &GraphOptions::default())
            .unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.adjacency.nnz(), 0);
    }

    #[test]
    fn text_graph_empty_vocabulary() {
        let err = build_text_graph(&[rec("p", "the of a", &[], &["cs.CL"], "Law")], &tax(), &GraphOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn min_word_freq_filters_vocabulary() {
        let recs = [rec("p1", "alpha beta", &[], &["x"], "Law"), rec("p2", "alpha gamma", &[], &["x"], "Law")];
        let opts = GraphOptions { min_word_freq: 2, ..GraphOptions::default() };
        let g = build_text_graph(&recs, &tax(), &opts).unwrap();
        assert_eq!(g.node_ids, ["p1", "p2", "word:alpha"]);
    }

    #[test]
    fn author_normalization() {
        assert_eq!(normalize_author("  A.  Smith "), "a smith");
        assert_eq!(normalize_author("a smith"), "a smith");
        assert_eq!(normalize_author("O'Neil, J."), "oneil j");
    }

    #[test]
    fn co_author_fixture() {
        let recs = [
            rec("1", "alpha", &["A. Smith", "C. Wu"], &["x"], "Law"),
            rec("2", "beta", &["a smith", "D. Diaz"], &["x"], "Law"),
            rec("3", "gamma", &["D. Diaz"], &["x"], "Finance"),
            rec("4", "delta", &["E. Ng"], &["x"], "Finance"),
        ];
        let g = build_co_author_graph(&recs, &tax(), &GraphOptions::default()).unwrap();
        g.validate().unwrap();
        let edges: Vec<_> = g.edges().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(edges, [(0, 1), (1, 2)]);
        let stats = graph_stats(&g);
        assert_eq!((stats.nodes, stats.edges, stats.directed_edges), (4, 2, 4));
        assert_eq!(stats.classes, 2);
    }

    #[test]
    fn co_author_without_shared_names() {
        let recs = [rec("1", "alpha", &["A"], &["x"], "Law"), rec("2", "beta", &["B"], &["x"], "Law")];
        let g = build_co_author_graph(&recs, &tax(), &GraphOptions::default()).unwrap();
        assert_eq!(g.adjacency.nnz(), 0);
    }

    #[test]
    fn co_category_complete_and_ablations() {
        let recs = [
            rec("1", "alpha", &[], &["cs.CL"], "Law"),
            rec("2", "beta", &[], &["cs.CL", "cs.AI"], "Law"),
            rec("3", "gamma", &[], &["cs.CL", "cs.AI"], "Finance"),
        ];
        let none = BTreeSet::new();
        let g = build_co_category_graph(&recs, &tax(), &none, &GraphOptions::default()).unwrap();
        assert_eq!(graph_stats(&g).edges, 3);

        let ir: BTreeSet<String> = ["cs.IR".to_string()].into();
        let g_ir = build_co_category_graph(&recs, &tax(), &ir, &GraphOptions::default()).unwrap();
        assert_eq!(g_ir.adjacency, g.adjacency);

        let cl: BTreeSet<String> = ["cs.CL".to_string()].into();
        let g_cl = build_co_category_graph(&recs, &tax(), &cl, &GraphOptions::default()).unwrap();
        assert_eq!(g_cl.edges().map(|(i, j, _)| (i, j)).collect::<Vec<_>>(), [(1, 2)]);
        let cat = g_cl.features.block(crate::text::CATEGORY_BLOCK).unwrap().clone();
        let cl_col = g_cl.features.columns[cat.start..cat.end].iter().position(|c| c == "category:cs.CL").unwrap();
        assert!(g_cl.features.values.column(cat.start + cl_col).iter().all(|&v| v == 0.0));

        let keep = GraphOptions { ablate_features: false, ..GraphOptions::default() };
        let g_keep = build_co_category_graph(&recs, &tax(), &cl, &keep).unwrap();
        assert_eq!(g_keep.features, g.features);
        assert_eq!(g_keep.adjacency, g_cl.adjacency);
    }
}
