//! Taxonomy classification of survey papers with graph convolutional networks.
//!
//! The pipeline reads paper metadata ([`corpus`]), turns it into features and
//! co-occurrence statistics ([`text`]), builds text, co-author or co-category
//! graphs ([`graph`]), trains a two-layer GCN ([`gcn`]) and evaluates it over
//! several seeds ([`eval`]). [`weaklabel`] exports model predictions for
//! downstream fine-tuning and [`llmjudge`] scores chat-model classifiers on the
//! same data.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod gcn;
pub mod graph;
pub mod llmjudge;
pub mod synthetic;
pub mod text;
pub mod weaklabel;

pub use error::{Error, Result};
