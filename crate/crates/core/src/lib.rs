//! Zero-shot classifier synthesis with graph convolutional networks.
//!
//! A GCN maps per-class word embeddings, propagated over a knowledge graph, to
//! linear visual classifiers. It is trained by regressing onto the classifiers of
//! seen classes and used to predict classifiers for unseen ones.

pub mod embed;
pub mod error;
pub mod experiment;
pub mod gcn;
pub mod kgraph;
pub mod linalg;
pub mod matio;
pub mod rng;
pub mod synth;
pub mod train;
pub mod zeroshot;

pub use error::{Error, Result};
