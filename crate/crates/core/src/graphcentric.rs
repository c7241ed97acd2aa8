//! Graph-centric block engine.
//!
//! A block program sees a whole partition block at once. Internal vertices
//! are read and written directly and writes are visible immediately within
//! the same call. Boundary vertices can be read, but only as of the last
//! barrier, and writing them is an error; they change only through
//! messages to the block that owns them.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::cluster::{exchange, AggPartials, AggValue, Aggregators, ExecMode, Outbox, RunMetrics, WireSize};
use crate::error::{Error, Result};
use crate::graph::{BlockSubgraph, Graph, PartitionAssignment, VertexId};
use crate::pregel::{MasterContext, PregelOutput, DEFAULT_MAX_SUPERSTEPS};

pub trait BlockProgram: Sync {
    type State: Clone + PartialEq + Send + Sync;
    type Message: Clone + Send + Sync + WireSize;
    /// Private per-block data kept across supersteps.
    type BlockData: Default + Send + Sync;

    fn init(&self, vertex: VertexId, graph: &Graph) -> Self::State;

    /// `messages` holds one entry per internal vertex with mail, sorted by
    /// vertex id.
    fn compute(
        &self,
        block: &mut BlockView<'_, Self::State, Self::BlockData>,
        messages: &[(VertexId, Vec<Self::Message>)],
        ctx: &mut BlockCtx<'_, Self::Message>,
    ) -> Result<()>;

    fn register_aggregators(&self, _aggregators: &mut Aggregators) {}

    fn master_compute(&self, _master: &mut MasterContext<'_>) {}
}

pub struct BlockView<'a, S, D> {
    sub: &'a BlockSubgraph,
    graph: &'a Graph,
    owner: &'a [usize],
    local_index: &'a [usize],
    local: &'a mut [S],
    snapshot: &'a [S],
    data: &'a mut D,
}

impl<'a, S, D> BlockView<'a, S, D> {
    pub fn subgraph(&self) -> &'a BlockSubgraph {
        self.sub
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn internal(&self) -> &'a [VertexId] {
        &self.sub.internal
    }

    pub fn boundary(&self) -> &[VertexId] {
        &self.sub.boundary
    }

    pub fn is_internal(&self, v: VertexId) -> bool {
        v < self.owner.len() && self.owner[v] == self.sub.block
    }

    /// Owning block of any vertex.
    pub fn owner_of(&self, v: VertexId) -> usize {
        self.owner[v]
    }

    /// Current value of an internal vertex, or the last-barrier value of a
    /// boundary vertex.
    pub fn get(&self, v: VertexId) -> Result<&S> {
        if self.is_internal(v) {
            Ok(&self.local[self.local_index[v]])
        } else if self.sub.is_boundary(v) {
            Ok(&self.snapshot[v])
        } else {
            Err(Error::contract(format!(
                "vertex {v} is not part of block {}",
                self.sub.block
            )))
        }
    }

    pub fn set(&mut self, v: VertexId, value: S) -> Result<()> {
        if !self.is_internal(v) {
            return Err(Error::contract(format!(
                "block {} tried to write vertex {v}, which it does not own",
                self.sub.block
            )));
        }
        self.local[self.local_index[v]] = value;
        Ok(())
    }

    pub fn data(&self) -> &D {
        self.data
    }

    pub fn data_mut(&mut self) -> &mut D {
        self.data
    }
}

pub struct BlockCtx<'a, M> {
    superstep: u64,
    num_vertices: usize,
    outbox: &'a mut Outbox<M>,
    aggregators: &'a Aggregators,
    partials: &'a mut AggPartials,
    halt: bool,
}

impl<M> BlockCtx<'_, M> {
    pub fn superstep(&self) -> u64 {
        self.superstep
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Delivered to the block owning `dst` at the next superstep.
    pub fn send_to_vertex(&mut self, dst: VertexId, message: M) {
        self.outbox.send(dst, message);
    }

    pub fn vote_to_halt(&mut self) {
        self.halt = true;
    }

    pub fn aggregated(&self, name: &str) -> Option<AggValue> {
        self.aggregators.get(name)
    }

    pub fn aggregate(&mut self, name: &str, value: AggValue) {
        self.partials.contribute(name, value);
    }
}

#[derive(Debug, Clone)]
pub struct GraphCentricConfig {
    pub max_supersteps: u64,
    pub mode: ExecMode,
}

impl Default for GraphCentricConfig {
    fn default() -> Self {
        GraphCentricConfig {
            max_supersteps: DEFAULT_MAX_SUPERSTEPS,
            mode: ExecMode::Sequential,
        }
    }
}

struct BlockRun<S, D, M> {
    sub: BlockSubgraph,
    states: Vec<S>,
    data: D,
    halted: bool,
    inbox: Vec<(VertexId, Vec<M>)>,
}

pub fn run_graph_centric<P: BlockProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    config: &GraphCentricConfig,
) -> Result<PregelOutput<P::State>> {
    assignment.check_graph(graph)?;
    if config.max_supersteps == 0 {
        return Err(Error::argument("max_supersteps must be at least 1"));
    }
    let started = Instant::now();
    let n = graph.num_vertices();
    let owner = assignment.owners();
    let mut local_index = vec![0usize; n];
    let mut blocks = Vec::with_capacity(assignment.num_blocks());
    for b in 0..assignment.num_blocks() {
        let sub = BlockSubgraph::build(graph, assignment, b)?;
        for (i, &v) in sub.internal.iter().enumerate() {
            local_index[v] = i;
        }
        blocks.push(BlockRun {
            states: sub.internal.iter().map(|&v| program.init(v, graph)).collect(),
            sub,
            data: P::BlockData::default(),
            halted: false,
            inbox: Vec::new(),
        });
    }
    let mut snapshot: Vec<P::State> = graph.vertices().map(|v| program.init(v, graph)).collect();
    let mut aggregators = Aggregators::new();
    program.register_aggregators(&mut aggregators);
    let mut records = BTreeMap::new();
    let mut metrics = RunMetrics::default();
    let mut master_halted = false;
    let mut superstep = 0u64;

    loop {
        let any_active = blocks.iter().any(|b| !b.halted || !b.inbox.is_empty());
        if master_halted || (superstep > 0 && !any_active) || n == 0 {
            break;
        }
        if superstep >= config.max_supersteps {
            metrics.step_limit_reached = true;
            break;
        }
        let snap = &snapshot;
        let aggs = &aggregators;
        let index = &local_index;
        let s = superstep;
        let results = config.mode.map(std::mem::take(&mut blocks), |mut b| {
            let mut outbox = Outbox::new(b.sub.block);
            let mut partials = aggs.partials();
            let inbox = std::mem::take(&mut b.inbox);
            let active = s == 0 || !b.halted || !inbox.is_empty();
            let mut outcome = Ok(false);
            if active {
                let mut view = BlockView {
                    sub: &b.sub,
                    graph,
                    owner,
                    local_index: index,
                    local: &mut b.states,
                    snapshot: snap,
                    data: &mut b.data,
                };
                let mut ctx = BlockCtx {
                    superstep: s,
                    num_vertices: n,
                    outbox: &mut outbox,
                    aggregators: aggs,
                    partials: &mut partials,
                    halt: false,
                };
                outcome = program.compute(&mut view, &inbox, &mut ctx).map(|()| ctx.halt);
                partials.compact(aggs);
            }
            (b, outbox, partials, active, outcome)
        });

        let mut outboxes = Vec::with_capacity(results.len());
        let mut partial_list = Vec::with_capacity(results.len());
        let mut active_blocks = 0;
        let mut first_error = None;
        for (mut b, outbox, partials, active, outcome) in results {
            if active {
                active_blocks += 1;
                metrics.compute_calls += 1;
                match outcome {
                    Ok(halt) => b.halted = halt,
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            }
            outboxes.push(outbox);
            partial_list.push(partials);
            blocks.push(b);
        }
        if let Some(e) = first_error {
            return Err(e);
        }
        metrics.active_vertices_per_superstep.push(active_blocks);

        for b in &blocks {
            for (&v, s) in b.sub.internal.iter().zip(&b.states) {
                if snapshot[v] != *s {
                    metrics.vertex_updates += 1;
                    snapshot[v] = s.clone();
                }
            }
        }

        let mut inboxes = exchange(outboxes, None, assignment, &mut metrics)?;
        for b in &mut blocks {
            b.inbox = Vec::new();
            for &v in &b.sub.internal {
                if !inboxes[v].is_empty() {
                    b.inbox.push((v, std::mem::take(&mut inboxes[v])));
                }
            }
        }

        aggregators.commit(partial_list)?;
        let mut master = MasterContext::new(superstep, n, &aggregators, &mut records);
        program.master_compute(&mut master);
        master_halted = master.halt_requested();
        metrics.supersteps += 1;
        superstep += 1;
    }
    metrics.wall_time = started.elapsed();
    Ok(PregelOutput {
        states: snapshot,
        metrics,
        aggregates: aggregators.values().clone(),
        records,
        halted_by_master: master_halted,
    })
}
