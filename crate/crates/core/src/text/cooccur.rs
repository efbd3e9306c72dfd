use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Vocabulary;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_SIZE: usize = 20;

/// Sliding-window width in tokens; always at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct WindowSize(usize);

impl WindowSize {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Config(format!("window size must be >= 2, got {size}")));
        }
        Ok(Self(size))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Default for WindowSize {
    fn default() -> Self {
        Self(DEFAULT_WINDOW_SIZE)
    }
}

impl TryFrom<usize> for WindowSize {
    type Error = Error;
    fn try_from(v: usize) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WindowSize> for usize {
    fn from(w: WindowSize) -> usize {
        w.0
    }
}

/// Window-level occurrence counts: how many windows contain each token and
/// each unordered token pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    pub window_size: WindowSize,
    pub window_count: u64,
    vocabulary: Vocabulary,
    word_counts: Vec<u64>,
    pair_counts: HashMap<(u32, u32), u64>,
}

#[derive(Default)]
struct Partial {
    windows: u64,
    words: HashMap<u32, u64>,
    pairs: HashMap<(u32, u32), u64>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.windows += other.windows;
        for (k, v) in other.words {
            *self.words.entry(k).or_default() += v;
        }
        for (k, v) in other.pairs {
            *self.pairs.entry(k).or_default() += v;
        }
        self
    }
}

/// Slides a window of `window_size` tokens over every document.
///
/// A document shorter than the window contributes a single window holding all
/// of its tokens; an empty document contributes none.
pub fn sliding_window_stats(docs: &[Vec<String>], window_size: WindowSize) -> CooccurrenceStats {
    let vocabulary = Vocabulary::from_docs(docs);
    let width = window_size.get();
    let total = docs
        .par_iter()
        .map(|doc| {
            let ids: Vec<u32> = doc
                .iter()
                .filter_map(|t| vocabulary.get(t).map(|i| i as u32))
                .collect();
            let mut part = Partial::default();
            if ids.is_empty() {
                return part;
            }
            let spans: Box<dyn Iterator<Item = &[u32]>> = if ids.len() <= width {
                Box::new(std::iter::once(ids.as_slice()))
            } else {
                Box::new(ids.windows(width))
            };
            let mut distinct = Vec::with_capacity(width);
            for span in spans {
                part.windows += 1;
                distinct.clear();
                distinct.extend_from_slice(span);
                distinct.sort_unstable();
                distinct.dedup();
                for (a, &i) in distinct.iter().enumerate() {
                    *part.words.entry(i).or_default() += 1;
                    for &j in &distinct[a + 1..] {
                        *part.pairs.entry((i, j)).or_default() += 1;
                    }
                }
            }
            part
        })
        .reduce(Partial::default, Partial::merge);

    let mut word_counts = vec![0u64; vocabulary.len()];
    for (i, c) in total.words {
        word_counts[i as usize] = c;
    }
    CooccurrenceStats {
        window_size,
        window_count: total.windows,
        vocabulary,
        word_counts,
        pair_counts: total.pairs,
    }
}

impl CooccurrenceStats {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Number of windows containing `token`, or `None` if it never occurs.
    pub fn word_count(&self, token: &str) -> Option<u64> {
        self.vocabulary.get(token).map(|i| self.word_counts[i])
    }

    /// Number of windows containing both tokens.
    pub fn pair_count(&self, a: &str, b: &str) -> Option<u64> {
        let (i, j) = (self.vocabulary.get(a)?, self.vocabulary.get(b)?);
        Some(self.pair_count_ids(i, j))
    }

    pub fn pair_count_ids(&self, i: usize, j: usize) -> u64 {
        let key = if i < j { (i as u32, j as u32) } else { (j as u32, i as u32) };
        self.pair_counts.get(&key).copied().unwrap_or(0)
    }

    /// All co-occurring pairs `(i, j, count)` with `i < j`, sorted by ids.
    pub fn pairs(&self) -> Vec<(usize, usize, u64)> {
        let mut out: Vec<_> = self
            .pair_counts
            .iter()
            .map(|(&(i, j), &c)| (i as usize, j as usize, c))
            .collect();
        out.sort_unstable();
        out
    }

    /// Positive PMI between two tokens; `None` when they never co-occur or
    /// the PMI is not positive.
    pub fn pmi(&self, a: &str, b: &str) -> Result<Option<f64>> {
        if a == b {
            return Err(Error::validation(format!("pmi needs two distinct tokens, got {a:?} twice")));
        }
        let lookup = |t: &str| {
            self.vocabulary
                .get(t)
                .ok_or_else(|| Error::validation(format!("unknown token {t:?}")))
        };
        let (i, j) = (lookup(a)?, lookup(b)?);
        Ok(self.pmi_ids(i, j))
    }

    pub fn pmi_ids(&self, i: usize, j: usize) -> Option<f64> {
        let pair = self.pair_count_ids(i, j);
        if pair == 0 {
            return None;
        }
        let pmi = pmi_value(pair, self.word_counts[i], self.word_counts[j], self.window_count);
        (pmi > 0.0).then_some(pmi)
    }

    /// Word pairs with positive PMI as `(i, j, pmi)`, `i < j`, sorted by ids.
    pub fn positive_pmi_edges(&self) -> Vec<(usize, usize, f64)> {
        self.pairs()
            .into_iter()
            .filter_map(|(i, j, _)| self.pmi_ids(i, j).map(|p| (i, j, p)))
            .collect()
    }
}

/// `ln((pair / W) / ((count_i / W) * (count_j / W)))`.
pub fn pmi_value(pair: u64, count_i: u64, count_j: u64, windows: u64) -> f64 {
    let w = windows as f64;
    ((pair as f64 / w) / ((count_i as f64 / w) * (count_j as f64 / w))).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|d| d.iter().map(|t| t.to_string()).collect()).collect()
    }

    #[test]
    fn short_doc_is_one_window() {
        let s = sliding_window_stats(&docs(&[&["a", "b"]]), WindowSize::default());
        assert_eq!(s.window_count, 1);
        assert_eq!(s.word_count("a"), Some(1));
        assert_eq!(s.word_count("b"), Some(1));
        assert_eq!(s.pair_count("a", "b"), Some(1));
    }

    #[test]
    fn enumerated_windows() {
        let s = sliding_window_stats(&docs(&[&["a", "b", "a", "c"]]), WindowSize::new(2).unwrap());
        assert_eq!(s.window_count, 3);
        assert_eq!(s.word_count("a"), Some(3));
        assert_eq!(s.word_count("b"), Some(2));
        assert_eq!(s.word_count("c"), Some(1));
        assert_eq!(s.pair_count("a", "b"), Some(2));
        assert_eq!(s.pair_count("b", "a"), Some(2));
        assert_eq!(s.pair_count("a", "c"), Some(1));
        assert_eq!(s.pair_count("b", "c"), Some(0));
    }

    #[test]
    fn empty_corpus() {
        let s = sliding_window_stats(&[], WindowSize::default());
        assert_eq!(s.window_count, 0);
        assert!(s.pairs().is_empty());
    }

    #[test]
    fn window_size_validated() {
        assert!(WindowSize::new(1).is_err());
        assert!(WindowSize::new(2).is_ok());
    }

    #[allow(clippy::approx_constant)]
    #[test]
    fn pmi_examples() {
        // Two windows, each token appears once, together: ln 2.
        let s = sliding_window_stats(&docs(&[&["x", "y"], &["z", "q"]]), WindowSize::default());
        let p = s.pmi("x", "y").unwrap().unwrap();
        assert!((p - 2f64.ln()).abs() < 1e-12);
        assert!((p - 0.6931).abs() < 1e-4);
        assert_eq!(s.pmi("x", "z").unwrap(), None);

        // Both tokens in every window: ln 1 = 0, not an edge.
        let s = sliding_window_stats(&docs(&[&["x", "y"], &["y", "x"]]), WindowSize::default());
        assert_eq!(s.pmi("x", "y").unwrap(), None);
    }

    #[test]
    fn pmi_errors() {
        let s = sliding_window_stats(&docs(&[&["x", "y"]]), WindowSize::default());
        assert!(s.pmi("x", "nope").is_err());
        assert!(s.pmi("x", "x").is_err());
    }
}
