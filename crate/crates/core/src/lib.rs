//! Graph processing under four programming models over a simulated
//! worker cluster: Pregel-style vertex programs, Gather-Apply-Scatter,
//! graph-centric block programs and PACT-style dataflows.

pub mod algorithms;
pub mod cluster;
pub mod error;
pub mod gas;
pub mod graph;
pub mod graphcentric;
pub mod pact;
pub mod pregel;

pub use algorithms::{Algorithm, Engine, RunOptions};
pub use cluster::{CheckpointPolicy, ExecMode, RunMetrics};
pub use error::{Error, Result};
pub use graph::{Graph, PartitionAssignment, VertexId};
