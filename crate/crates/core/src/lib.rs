//! Clustering-based reduced-order LQR design for networked LTI systems.

pub mod cluster_design;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lqr;
pub mod mmio;
pub mod model;
pub mod netgen;
pub mod projection;
pub mod spectral;
pub mod weight_design;

pub use error::{Error, ErrorKind, Result};
pub use model::{ClusterPartition, Graph, LtiSystem};
