//! Topic modeling and concept graphs for semi-structured interview
//! transcripts.
//!
//! The crate turns raw transcripts into a lemmatized [`corpus::Corpus`],
//! fits one of five topic-model pipelines ([`pipeline::Method`]), scores the
//! result with coherence, diversity and cluster-validity metrics, and builds
//! a keyword concept graph whose vertices link back to the sentences that
//! mention them.

pub mod cluster;
pub mod coherence;
pub mod corpus;
pub mod distance;
pub mod embeddings;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod lda;
pub mod pipeline;
pub mod reduce;
pub mod service;
pub mod topics;

pub use error::{Error, Result};
