//! Community-aware node roles for directed graphs.
//!
//! The pipeline detects communities with a directed-modularity Louvain,
//! computes eight community-standardised role measures per node (internal
//! and external intensity, diversity and heterogeneity, each for in- and
//! out-links), groups nodes into roles with a k-means sweep scored by the
//! Davies-Bouldin index, and characterises populations of nodes by role.

pub mod clustering;
pub mod community;
pub mod error;
pub mod graph;
pub mod measures;
pub mod pipeline;
pub mod rng;
pub mod roles;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
