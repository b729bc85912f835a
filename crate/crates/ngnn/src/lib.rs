//! Outfit compatibility learning on a weighted category graph.
//!
//! The pipeline: build a directed, weighted category co-occurrence graph from
//! an outfit corpus, represent each outfit as the induced subgraph over its
//! item categories, run a few rounds of gated message passing over that
//! subgraph, and read the node states out into a scalar compatibility score
//! through a self-attention head. Training ranks observed outfits above
//! corrupted ones (BPR) with RMSProp on exact reverse-mode gradients.
//!
//! Three propagation variants are supported:
//! - `ngnn`: node-wise parameters — the transform on edge j→i is the product
//!   of the sender's output matrix and the receiver's input matrix,
//! - `ggnn`: one transform matrix shared by every edge,
//! - `egnn`: an independent transform matrix per edge.
//!
//! Everything is seeded and single-threaded by default: the same seed, data
//! and config reproduce bit-identical checkpoints and metrics.

pub mod autodiff;
pub mod benchmark;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod graph;
pub mod hash;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
