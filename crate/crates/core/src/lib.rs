//! Prototype-driven curriculum sampling.
//!
//! Embeddings are clustered with mini-batch k-means (the cluster count can be
//! picked by the Davies-Bouldin index), each sample is scored by its
//! min-max-normalized distance to its centroid, and training epochs are drawn
//! with replacement from a temperature-controlled softmax over those scores.
//! The temperature is annealed over training either directly or through the
//! expected number of distinct samples per epoch.

pub mod clustering;
pub mod config;
pub mod data_io;
pub mod error;
pub mod oracles;
pub mod pipeline;
pub mod prototypicality;
pub mod runtime;
pub mod sampler;
pub mod schedule;
mod wire;

pub use error::{Error, Result};
