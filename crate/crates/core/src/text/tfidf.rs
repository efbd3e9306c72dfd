use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of unique tokens with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// All non-empty tokens appearing in `docs`, sorted lexicographically.
    pub fn from_docs(docs: &[Vec<String>]) -> Self {
        let unique: BTreeSet<&str> = docs
            .iter()
            .flatten()
            .map(String::as_str)
            .filter(|t| !t.is_empty())
            .collect();
        Self::from_sorted(unique.into_iter().map(String::from).collect())
    }

    fn from_sorted(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    /// Keeps only the tokens for which `keep` returns true, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        Self::from_sorted(self.tokens.iter().filter(|t| keep(t)).cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }
}

/// Inverse-document-frequency variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdfMode {
    /// `ln(N / df)`.
    #[default]
    Raw,
    /// `ln((1 + N) / (1 + df)) + 1`.
    Smooth,
}

impl IdfMode {
    pub fn idf(self, n_docs: usize, df: usize) -> f64 {
        match self {
            IdfMode::Raw => (n_docs as f64 / df as f64).ln(),
            IdfMode::Smooth => ((1 + n_docs) as f64 / (1 + df) as f64).ln() + 1.0,
        }
    }
}

/// Dense TF-IDF block: one row per document, one column per vocabulary token.
#[derive(Debug, Clone, PartialEq)]
pub struct Tfidf {
    pub vocabulary: Vocabulary,
    pub values: Array2<f64>,
}

pub fn tfidf(docs: &[Vec<String>]) -> Result<Tfidf> {
    tfidf_with(docs, IdfMode::Raw)
}

/// Raw-count term frequency times `mode` inverse document frequency.
pub fn tfidf_with(docs: &[Vec<String>], mode: IdfMode) -> Result<Tfidf> {
    let vocabulary = Vocabulary::from_docs(docs);
    if vocabulary.is_empty() {
        return Err(Error::EmptyInput("tf-idf needs at least one non-empty document".into()));
    }
    tfidf_over(docs, vocabulary, mode)
}

/// TF-IDF against a fixed vocabulary; tokens outside it are ignored.
pub fn tfidf_over(docs: &[Vec<String>], vocabulary: Vocabulary, mode: IdfMode) -> Result<Tfidf> {
    let n_docs = docs.len();
    let mut counts = Array2::<f64>::zeros((n_docs, vocabulary.len()));
    let mut df = vec![0usize; vocabulary.len()];
    for (row, doc) in docs.iter().enumerate() {
        for tok in doc {
            if let Some(col) = vocabulary.get(tok) {
                if counts[[row, col]] == 0.0 {
                    df[col] += 1;
                }
                counts[[row, col]] += 1.0;
            }
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { mode.idf(n_docs, d) })
        .collect();
    for ((_, col), v) in counts.indexed_iter_mut() {
        *v *= idf[col];
    }
    Ok(Tfidf { vocabulary, values: counts })
}
