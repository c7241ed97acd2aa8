use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::asynch::{initial_queue, lock_all, neighborhood, QueueOrder, Scheduler};
use super::sync::check_target;
use super::{count_message, fold_opt, GasOutput};
use crate::cluster::{exchange, Combiner, ExecMode, Outbox, RunMetrics, WireSize};
use crate::error::Result;
use crate::graph::{Graph, PartitionAssignment, VertexId};

/// A GAS program that reads a combined inbox instead of gathering.
pub trait MessageProgram: Sync {
    type State: Clone + PartialEq + Send + Sync;
    type Message: Clone + Send + Sync + WireSize;
    type Scratch: Send;

    fn init(&self, vertex: VertexId, graph: &Graph) -> Self::State;

    /// Folds two messages for the same vertex. Must be associative and
    /// commutative.
    fn combine(&self, a: Self::Message, b: Self::Message) -> Self::Message;

    /// `first` is set on the vertex's initial activation, which may or may
    /// not come with a message.
    fn apply(
        &self,
        graph: &Graph,
        vertex: VertexId,
        state: &mut Self::State,
        message: Option<Self::Message>,
        first: bool,
    ) -> Self::Scratch;

    fn scatter(
        &self,
        graph: &Graph,
        vertex: VertexId,
        state: &Self::State,
        scratch: &Self::Scratch,
        ctx: &mut MessageCtx<'_, Self::Message>,
    );
}

pub struct MessageCtx<'a, M> {
    out: &'a mut Vec<(VertexId, M)>,
}

impl<M> MessageCtx<'_, M> {
    /// Sends `message` to `dst`, which will be scheduled to receive it.
    pub fn send(&mut self, dst: VertexId, message: M) {
        self.out.push((dst, message));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageEngine {
    Sync,
    Async,
}

#[derive(Debug, Clone)]
pub struct MessageOptions {
    pub engine: MessageEngine,
    pub max_iterations: u64,
    pub max_updates: u64,
    pub order: QueueOrder,
    pub mode: ExecMode,
}

impl Default for MessageOptions {
    fn default() -> Self {
        MessageOptions {
            engine: MessageEngine::Sync,
            max_iterations: 10_000,
            max_updates: 10_000_000,
            order: QueueOrder::Shuffled(0),
            mode: ExecMode::Sequential,
        }
    }
}

struct ProgramCombiner<'a, P>(&'a P);

impl<P: MessageProgram> Combiner<P::Message> for ProgramCombiner<'_, P> {
    fn combine(&self, a: P::Message, b: P::Message) -> P::Message {
        self.0.combine(a, b)
    }
}

pub fn run_gas_message<P: MessageProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    options: &MessageOptions,
) -> Result<GasOutput<P::State>> {
    assignment.check_graph(graph)?;
    match options.engine {
        MessageEngine::Sync => run_sync(graph, assignment, program, options),
        MessageEngine::Async => run_async(graph, assignment, program, options),
    }
}

fn run_sync<P: MessageProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    options: &MessageOptions,
) -> Result<GasOutput<P::State>> {
    let started = Instant::now();
    let n = graph.num_vertices();
    let mut states: Vec<P::State> = graph.vertices().map(|v| program.init(v, graph)).collect();
    let mut inbox: Vec<Vec<P::Message>> = vec![Vec::new(); n];
    let mut active = vec![true; n];
    let blocks = assignment.blocks();
    let combiner = ProgramCombiner(program);
    let mut metrics = RunMetrics::default();
    let mut iteration = 0;
    loop {
        let mut work = Vec::with_capacity(blocks.len());
        let mut count = 0;
        for (w, block) in blocks.iter().enumerate() {
            let items: Vec<(VertexId, Option<P::Message>)> = block
                .iter()
                .filter(|&&v| active[v])
                .map(|&v| (v, inbox[v].pop()))
                .collect();
            count += items.len();
            work.push((w, items));
        }
        if count == 0 {
            break;
        }
        if iteration >= options.max_iterations {
            metrics.step_limit_reached = true;
            break;
        }
        metrics.active_vertices_per_superstep.push(count as u64);

        let states_ref = &states;
        let first = iteration == 0;
        let results = options.mode.map(work, |(w, items)| {
            let mut outbox = Outbox::new(w);
            let mut updated = Vec::new();
            let mut calls = 0u64;
            let mut sends = Vec::new();
            for (v, msg) in items {
                let mut s = states_ref[v].clone();
                let scratch = program.apply(graph, v, &mut s, msg, first);
                calls += 1;
                program.scatter(graph, v, &s, &scratch, &mut MessageCtx { out: &mut sends });
                for (dst, m) in sends.drain(..) {
                    outbox.send(dst, m);
                }
                if s != states_ref[v] {
                    updated.push((v, s));
                }
            }
            (outbox, updated, calls)
        });
        let mut outboxes = Vec::with_capacity(results.len());
        for (outbox, updated, calls) in results {
            metrics.compute_calls += calls;
            metrics.vertex_updates += updated.len() as u64;
            for (v, s) in updated {
                states[v] = s;
            }
            outboxes.push(outbox);
        }
        inbox = exchange(outboxes, Some(&combiner), assignment, &mut metrics)?;
        for (v, msgs) in inbox.iter().enumerate() {
            active[v] = !msgs.is_empty();
        }
        iteration += 1;
        metrics.supersteps += 1;
    }
    metrics.wall_time = started.elapsed();
    Ok(GasOutput {
        states,
        metrics,
        max_cache_discrepancy: 0.0,
        schedule: Vec::new(),
    })
}

fn run_async<P: MessageProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    options: &MessageOptions,
) -> Result<GasOutput<P::State>> {
    let started = Instant::now();
    let n = graph.num_vertices();
    let states: Vec<Mutex<P::State>> = graph.vertices().map(|v| Mutex::new(program.init(v, graph))).collect();
    let pending: Vec<Mutex<Option<P::Message>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let started_flags: Vec<AtomicBool> = (0..n).map(|_| AtomicBool::new(false)).collect();
    let lock = |m: &Mutex<Option<P::Message>>| m.lock().unwrap_or_else(|e| e.into_inner()).take();

    let job = |v: VertexId, metrics: &mut RunMetrics| -> Result<Vec<VertexId>> {
        let ids = neighborhood(graph, v);
        let mut guards = lock_all(&states, &ids);
        let me = ids.binary_search(&v).expect("self in lock set");
        let msg = lock(&pending[v]);
        let before = guards[me].clone();
        let first = !started_flags[v].swap(true, Ordering::Relaxed);
        let scratch = program.apply(graph, v, &mut guards[me], msg, first);
        metrics.compute_calls += 1;
        if *guards[me] != before {
            metrics.vertex_updates += 1;
        }
        let mut sends = Vec::new();
        program.scatter(graph, v, &guards[me], &scratch, &mut MessageCtx { out: &mut sends });
        let mut signals = Vec::with_capacity(sends.len());
        for (seq, (dst, m)) in sends.into_iter().enumerate() {
            check_target(dst, v, seq, assignment)?;
            count_message(metrics, assignment, v, dst, m.wire_size());
            let mut slot = pending[dst].lock().unwrap_or_else(|e| e.into_inner());
            *slot = fold_opt(slot.take(), Some(m), |a, b| program.combine(a, b));
            signals.push(dst);
        }
        Ok(signals)
    };

    let sched = Scheduler::new(n, initial_queue(n, &options.order)?, options.max_updates);
    let (mut metrics, limit) = sched.drive(options.mode, 0, job)?;
    metrics.step_limit_reached = limit;
    metrics.wall_time = started.elapsed();
    Ok(GasOutput {
        states: states
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
            .collect(),
        metrics,
        max_cache_discrepancy: 0.0,
        schedule: Vec::new(),
    })
}
