//! Simulated worker cluster shared by every engine.
//!
//! Workers live in one process. A message is "remote" when its sender and
//! the owner of its destination differ; that is the only thing that makes a
//! worker a worker. Outgoing messages are buffered per worker and only
//! routed at the superstep barrier.

mod aggregate;
mod checkpoint;
mod exact;
mod message;
mod metrics;

use rayon::prelude::*;

pub use aggregate::{AggOp, AggPartials, AggValue, Aggregators};
pub use checkpoint::{Checkpoint, CheckpointPolicy, FORMAT_VERSION};
pub use exact::ExactSum;
pub use message::{exchange, Combiner, MessageEnvelope, MinCombiner, Outbox, SumCombiner, WireSize};
pub use metrics::RunMetrics;

/// How simulated workers execute their compute phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ExecMode {
    /// One worker after another on the calling thread.
    #[default]
    Sequential,
    /// Workers on the rayon pool; the barrier is the only join point.
    Parallel,
}

impl ExecMode {
    /// Runs `f` once per item, returning results in item order.
    pub(crate) fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            ExecMode::Sequential => items.into_iter().map(f).collect(),
            ExecMode::Parallel => items.into_par_iter().map(f).collect(),
        }
    }
}
