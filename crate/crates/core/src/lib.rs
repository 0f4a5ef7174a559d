//! Active learning for semi-supervised node classification.
//!
//! A two-layer GCN is trained while a query strategy grows its labeled set
//! one node at a time. The main strategy restricts queries to a pool of
//! structurally central nodes and ranks pool members by the expected drop
//! in graph uncertainty, estimated with label propagation and weighted by
//! the GCN's class probabilities.

pub mod centrality;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod harness;
pub mod labels;
pub mod propagation;
pub mod strategy;

pub use error::{Error, Result};
