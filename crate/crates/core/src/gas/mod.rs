//! Gather-Apply-Scatter engines.
//!
//! A program gathers over one set of edges, folds the results with
//! `gather_sum`, mutates the vertex in `apply`, and walks another set of
//! edges in `scatter` to signal neighbors or post deltas. `apply` is the
//! only place vertex state changes.
//!
//! [`run_gas_sync`] runs the three phases in lockstep with barriers.
//! [`run_gas_async`] pulls vertices from a FIFO work queue and runs all
//! three phases as one unit, so an update is visible to the next vertex
//! scheduled. [`run_gas_message`] drives programs that consume a combined
//! inbox instead of gathering.

mod asynch;
mod message;
mod sync;

pub use asynch::{replay_schedule, run_gas_async, AsyncOptions, QueueOrder};
pub use message::{run_gas_message, MessageCtx, MessageEngine, MessageOptions, MessageProgram};
pub use sync::{run_gas_sync, SyncOptions};

use crate::cluster::{RunMetrics, WireSize};
use crate::graph::{EdgeId, Graph, PartitionAssignment, VertexId};

/// Which incident edges a phase visits. On undirected graphs every
/// choice means "all neighbors".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDir {
    In,
    Out,
    All,
    None,
}

/// Read-only view of the far end of an edge.
pub struct Nbr<'a, S, E> {
    pub id: VertexId,
    pub state: &'a S,
    pub edge: EdgeId,
    pub data: &'a E,
}

pub trait GasProgram: Sync {
    type State: Clone + PartialEq + Send + Sync;
    type Gather: Clone + Send + Sync + WireSize;
    type EdgeData: Clone + Default + Send + Sync;
    /// Values computed in `apply` and handed to `scatter` for the same
    /// execution.
    type Scratch: Send + Sync;

    fn init(&self, vertex: VertexId, graph: &Graph) -> Self::State;

    fn gather_dir(&self) -> EdgeDir;

    fn scatter_dir(&self) -> EdgeDir;

    fn gather(
        &self,
        graph: &Graph,
        vertex: VertexId,
        state: &Self::State,
        nbr: Nbr<'_, Self::State, Self::EdgeData>,
    ) -> Self::Gather;

    /// Must be associative and commutative.
    fn gather_sum(&self, a: Self::Gather, b: Self::Gather) -> Self::Gather;

    /// `acc` is `None` when there was nothing to gather.
    fn apply(
        &self,
        graph: &Graph,
        vertex: VertexId,
        state: &mut Self::State,
        acc: Option<Self::Gather>,
    ) -> Self::Scratch;

    fn scatter(
        &self,
        graph: &Graph,
        vertex: VertexId,
        state: &Self::State,
        scratch: &Self::Scratch,
        nbr: Nbr<'_, Self::State, Self::EdgeData>,
        ctx: &mut ScatterCtx<'_, Self::Gather, Self::EdgeData>,
    );

    /// Whether posted deltas keep a cached gather exact. Only such
    /// programs skip the gather phase under delta caching.
    fn delta_correct(&self) -> bool {
        false
    }

    /// Distance between a cached and a freshly gathered aggregate, used by
    /// the cache audit.
    fn gather_distance(&self, _cached: &Self::Gather, _fresh: &Self::Gather) -> f64 {
        0.0
    }
}

/// Side effects a scatter call may request. They take effect after the
/// scatter phase (sync) or after the execution (async).
pub struct ScatterCtx<'a, G, E> {
    edge: EdgeId,
    out: &'a mut ScatterOut<G, E>,
}

impl<G, E> ScatterCtx<'_, G, E> {
    /// Schedules `target` for execution.
    pub fn signal(&mut self, target: VertexId) {
        self.out.signals.push(target);
    }

    /// Adds `delta` to the cached gather of `target` without scheduling it.
    pub fn post_delta(&mut self, target: VertexId, delta: G) {
        self.out.deltas.push((target, delta));
    }

    /// Replaces the data stored on the edge being scattered over.
    pub fn set_edge_data(&mut self, data: E) {
        self.out.edge_writes.push((self.edge, data));
    }
}

pub(crate) struct ScatterOut<G, E> {
    pub signals: Vec<VertexId>,
    pub deltas: Vec<(VertexId, G)>,
    pub edge_writes: Vec<(EdgeId, E)>,
}

impl<G, E> Default for ScatterOut<G, E> {
    fn default() -> Self {
        ScatterOut {
            signals: Vec::new(),
            deltas: Vec::new(),
            edge_writes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GasOutput<S> {
    pub states: Vec<S>,
    pub metrics: RunMetrics,
    /// Largest `gather_distance` seen by the cache audit.
    pub max_cache_discrepancy: f64,
    /// Order in which vertices were applied, when recording was requested.
    pub schedule: Vec<VertexId>,
}

/// Incident edges of `v` for a phase, as (neighbor, edge id).
pub(crate) fn incident(graph: &Graph, v: VertexId, dir: EdgeDir) -> Vec<(VertexId, EdgeId)> {
    if dir == EdgeDir::None {
        return Vec::new();
    }
    if !graph.is_directed() {
        return graph.out_edges(v).collect();
    }
    match dir {
        EdgeDir::In => graph.in_edges(v).collect(),
        EdgeDir::Out => graph.out_edges(v).collect(),
        EdgeDir::All => graph.in_edges(v).chain(graph.out_edges(v)).collect(),
        EdgeDir::None => unreachable!(),
    }
}

/// Counts one message from `from` to `to` in the traffic metrics.
pub(crate) fn count_message(
    metrics: &mut RunMetrics,
    assignment: &PartitionAssignment,
    from: VertexId,
    to: VertexId,
    bytes: usize,
) {
    metrics.record_message(assignment.owner(from) == assignment.owner(to), bytes);
}

pub(crate) fn fold_opt<G>(a: Option<G>, b: Option<G>, sum: impl Fn(G, G) -> G) -> Option<G> {
    match (a, b) {
        (Some(a), Some(b)) => Some(sum(a, b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Cached gather of one vertex plus deltas posted since.
#[derive(Debug, Clone)]
pub(crate) struct CacheSlot<G> {
    pub valid: bool,
    pub value: Option<G>,
    pub pending: Option<G>,
}

impl<G> Default for CacheSlot<G> {
    fn default() -> Self {
        CacheSlot {
            valid: false,
            value: None,
            pending: None,
        }
    }
}

/// Bytes charged for a signal: the target id.
pub(crate) const SIGNAL_BYTES: usize = 8;

#[cfg(test)]
mod tests;
