//! Tokenization, TF-IDF and category features, and window co-occurrence.

mod cooccur;
mod features;
mod tfidf;
mod tokenize;

pub use cooccur::{pmi_value, sliding_window_stats, CooccurrenceStats, WindowSize, DEFAULT_WINDOW_SIZE};
pub use features::{
    category_universe, one_hot_categories, paper_features, FeatureBlock, FeatureMatrix,
    FeatureSidecar, CATEGORY_BLOCK, SUMMARY_BLOCK, TITLE_BLOCK,
};
pub(crate) use features::paper_features_masked;
pub use tfidf::{tfidf, tfidf_over, tfidf_with, IdfMode, Tfidf, Vocabulary};
pub use tokenize::{clean_tokenize, stopwords};
