use std::collections::VecDeque;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sync::check_target;
use super::{
    count_message, fold_opt, incident, CacheSlot, GasOutput, GasProgram, Nbr, ScatterCtx,
    ScatterOut, SIGNAL_BYTES,
};
use crate::cluster::{ExecMode, RunMetrics, WireSize};
use crate::error::{Error, Result};
use crate::graph::{Graph, PartitionAssignment, VertexId};

/// Initial content of the work queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueueOrder {
    Ascending,
    /// All vertices, shuffled with the given seed.
    Shuffled(u64),
    /// Exactly these vertices, in this order.
    Explicit(Vec<VertexId>),
}

#[derive(Debug, Clone)]
pub struct AsyncOptions {
    pub max_updates: u64,
    pub order: QueueOrder,
    pub delta_caching: bool,
    pub audit_cache: bool,
    /// `Parallel` runs several threads over the queue with neighborhood
    /// locking.
    pub mode: ExecMode,
    /// Thread count in parallel mode; 0 picks the available parallelism.
    pub threads: usize,
    /// Log the order of applies into [`GasOutput::schedule`].
    pub record_schedule: bool,
}

impl Default for AsyncOptions {
    fn default() -> Self {
        AsyncOptions {
            max_updates: 10_000_000,
            order: QueueOrder::Shuffled(0),
            delta_caching: false,
            audit_cache: false,
            mode: ExecMode::Sequential,
            threads: 0,
            record_schedule: false,
        }
    }
}

impl AsyncOptions {
    pub fn seeded(seed: u64) -> Self {
        AsyncOptions {
            order: QueueOrder::Shuffled(seed),
            ..Default::default()
        }
    }
}

pub(crate) fn initial_queue(n: usize, order: &QueueOrder) -> Result<Vec<VertexId>> {
    Ok(match order {
        QueueOrder::Ascending => (0..n).collect(),
        QueueOrder::Shuffled(seed) => {
            let mut q: Vec<VertexId> = (0..n).collect();
            q.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            q
        }
        QueueOrder::Explicit(list) => {
            if let Some(&v) = list.iter().find(|&&v| v >= n) {
                return Err(Error::argument(format!("queued vertex {v} is not in the graph")));
            }
            list.clone()
        }
    })
}

struct SchedState {
    queue: VecDeque<VertexId>,
    queued: Vec<bool>,
    running: usize,
    updates: u64,
    done: bool,
    limit_reached: bool,
    error: Option<Error>,
}

/// FIFO work queue with de-duplication shared by the async engines.
pub(crate) struct Scheduler {
    state: Mutex<SchedState>,
    wake: Condvar,
    max_updates: u64,
}

impl Scheduler {
    pub(crate) fn new(n: usize, initial: Vec<VertexId>, max_updates: u64) -> Self {
        let mut queued = vec![false; n];
        let mut queue = VecDeque::with_capacity(initial.len());
        for v in initial {
            if !queued[v] {
                queued[v] = true;
                queue.push_back(v);
            }
        }
        Scheduler {
            state: Mutex::new(SchedState {
                queue,
                queued,
                running: 0,
                updates: 0,
                done: false,
                limit_reached: false,
                error: None,
            }),
            wake: Condvar::new(),
            max_updates,
        }
    }

    fn lock(&self) -> MutexGuard<'_, SchedState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Next vertex to execute, or `None` once the queue has drained and no
    /// execution is in flight.
    fn next(&self) -> Option<VertexId> {
        let mut s = self.lock();
        loop {
            if s.done {
                return None;
            }
            if let Some(v) = s.queue.pop_front() {
                if s.updates >= self.max_updates {
                    s.queue.push_front(v);
                    s.limit_reached = true;
                    s.done = true;
                    self.wake.notify_all();
                    return None;
                }
                s.queued[v] = false;
                s.running += 1;
                s.updates += 1;
                return Some(v);
            }
            if s.running == 0 {
                s.done = true;
                self.wake.notify_all();
                return None;
            }
            s = self.wake.wait(s).unwrap_or_else(|e| e.into_inner());
        }
    }

    fn finish(&self, signals: Vec<VertexId>) {
        let mut s = self.lock();
        for t in signals {
            if !s.queued[t] {
                s.queued[t] = true;
                s.queue.push_back(t);
            }
        }
        s.running -= 1;
        self.wake.notify_all();
    }

    fn fail(&self, error: Error) {
        let mut s = self.lock();
        s.running -= 1;
        s.done = true;
        s.error.get_or_insert(error);
        self.wake.notify_all();
    }

    /// Runs `job` on every scheduled vertex until the queue drains.
    /// `job` returns the vertices to signal.
    pub(crate) fn drive<F>(&self, mode: ExecMode, threads: usize, job: F) -> Result<(RunMetrics, bool)>
    where
        F: Fn(VertexId, &mut RunMetrics) -> Result<Vec<VertexId>> + Sync,
    {
        let worker = || {
            let mut m = RunMetrics::default();
            while let Some(v) = self.next() {
                match job(v, &mut m) {
                    Ok(signals) => self.finish(signals),
                    Err(e) => {
                        self.fail(e);
                        break;
                    }
                }
            }
            m
        };
        let mut metrics = RunMetrics::default();
        match mode {
            ExecMode::Sequential => metrics = worker(),
            ExecMode::Parallel => {
                let threads = match threads {
                    0 => std::thread::available_parallelism().map_or(2, |n| n.get()).clamp(2, 16),
                    t => t,
                };
                let parts: Vec<RunMetrics> = std::thread::scope(|scope| {
                    let handles: Vec<_> = (0..threads).map(|_| scope.spawn(worker)).collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("async worker panicked"))
                        .collect()
                });
                for p in &parts {
                    metrics.absorb(p);
                }
            }
        }
        let mut s = self.lock();
        if let Some(e) = s.error.take() {
            return Err(e);
        }
        Ok((metrics, s.limit_reached))
    }
}

/// Sorted lock set of `v`: itself and every neighbor in either direction.
pub(crate) fn neighborhood(graph: &Graph, v: VertexId) -> Vec<VertexId> {
    let mut set: Vec<VertexId> = graph.out_neighbors(v).to_vec();
    if graph.is_directed() {
        set.extend_from_slice(graph.in_neighbors(v));
    }
    set.push(v);
    set.sort_unstable();
    set.dedup();
    set
}

pub(crate) fn lock_all<'a, T>(slots: &'a [Mutex<T>], ids: &[VertexId]) -> Vec<MutexGuard<'a, T>> {
    ids.iter()
        .map(|&u| slots[u].lock().unwrap_or_else(|e| e.into_inner()))
        .collect()
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

struct Shared<'g, P: GasProgram> {
    graph: &'g Graph,
    assignment: &'g PartitionAssignment,
    program: &'g P,
    caching: bool,
    audit: bool,
    states: Vec<Mutex<P::State>>,
    edge_data: Vec<Mutex<P::EdgeData>>,
    cache: Vec<Mutex<CacheSlot<P::Gather>>>,
    log: Option<Mutex<Vec<VertexId>>>,
    discrepancy: Mutex<f64>,
}

impl<'g, P: GasProgram> Shared<'g, P> {
    fn new(
        graph: &'g Graph,
        assignment: &'g PartitionAssignment,
        program: &'g P,
        options: &AsyncOptions,
    ) -> Self {
        let caching = options.delta_caching && program.delta_correct();
        Shared {
            graph,
            assignment,
            program,
            caching,
            audit: options.audit_cache,
            states: graph.vertices().map(|v| Mutex::new(program.init(v, graph))).collect(),
            edge_data: (0..graph.num_edge_slots()).map(|_| Mutex::default()).collect(),
            cache: (0..if caching { graph.num_vertices() } else { 0 })
                .map(|_| Mutex::default())
                .collect(),
            log: options.record_schedule.then(|| Mutex::new(Vec::new())),
            discrepancy: Mutex::new(0.0),
        }
    }

    fn gather_fresh(
        &self,
        v: VertexId,
        ids: &[VertexId],
        guards: &[MutexGuard<'_, P::State>],
        metrics: &mut RunMetrics,
    ) -> Option<P::Gather> {
        let state_of = |u: VertexId| &*guards[ids.binary_search(&u).expect("locked")];
        let mut acc = None;
        for (u, e) in incident(self.graph, v, self.program.gather_dir()) {
            let data = lock(&self.edge_data[e]);
            let nbr = Nbr {
                id: u,
                state: state_of(u),
                edge: e,
                data: &*data,
            };
            let g = self.program.gather(self.graph, v, state_of(v), nbr);
            count_message(metrics, self.assignment, u, v, g.wire_size());
            acc = fold_opt(acc, Some(g), |a, b| self.program.gather_sum(a, b));
        }
        acc
    }

    /// Runs gather, apply and scatter for `v` while holding the locks of
    /// its whole neighborhood.
    fn execute(&self, v: VertexId, metrics: &mut RunMetrics) -> Result<Vec<VertexId>> {
        let graph = self.graph;
        let program = self.program;
        let ids = neighborhood(graph, v);
        let mut guards = lock_all(&self.states, &ids);
        let me = ids.binary_search(&v).expect("self in lock set");

        let acc = if self.caching && lock(&self.cache[v]).valid {
            let acc = {
                let mut slot = lock(&self.cache[v]);
                let acc = fold_opt(slot.value.take(), slot.pending.take(), |a, b| program.gather_sum(a, b));
                slot.value = acc.clone();
                acc
            };
            if self.audit {
                let check = self.gather_fresh(v, &ids, &guards, &mut RunMetrics::default());
                let d = match (&acc, &check) {
                    (Some(a), Some(b)) => program.gather_distance(a, b),
                    (None, None) => 0.0,
                    _ => f64::INFINITY,
                };
                let mut worst = lock(&self.discrepancy);
                *worst = worst.max(d);
            }
            acc
        } else {
            let acc = self.gather_fresh(v, &ids, &guards, metrics);
            if self.caching {
                *lock(&self.cache[v]) = CacheSlot {
                    valid: true,
                    value: acc.clone(),
                    pending: None,
                };
            }
            acc
        };

        let before = guards[me].clone();
        let scratch = program.apply(graph, v, &mut guards[me], acc);
        metrics.compute_calls += 1;
        if *guards[me] != before {
            metrics.vertex_updates += 1;
        }
        if let Some(log) = &self.log {
            lock(log).push(v);
        }

        let mut out = ScatterOut::default();
        {
            let state_of = |u: VertexId| &*guards[ids.binary_search(&u).expect("locked")];
            for (u, e) in incident(graph, v, program.scatter_dir()) {
                let data = lock(&self.edge_data[e]).clone();
                let nbr = Nbr {
                    id: u,
                    state: state_of(u),
                    edge: e,
                    data: &data,
                };
                let mut ctx = ScatterCtx { edge: e, out: &mut out };
                program.scatter(graph, v, state_of(v), &scratch, nbr, &mut ctx);
            }
        }
        for (seq, &t) in out.signals.iter().enumerate() {
            check_target(t, v, seq, self.assignment)?;
            count_message(metrics, self.assignment, v, t, SIGNAL_BYTES);
        }
        for (seq, (t, d)) in out.deltas.into_iter().enumerate() {
            check_target(t, v, seq, self.assignment)?;
            if self.caching {
                count_message(metrics, self.assignment, v, t, d.wire_size());
                let mut slot = lock(&self.cache[t]);
                slot.pending = fold_opt(slot.pending.take(), Some(d), |a, b| program.gather_sum(a, b));
            }
        }
        for (e, data) in out.edge_writes {
            *lock(&self.edge_data[e]) = data;
        }
        drop(guards);
        Ok(out.signals)
    }

    fn finish(self, metrics: RunMetrics, started: Instant) -> GasOutput<P::State> {
        let mut metrics = metrics;
        metrics.wall_time = started.elapsed();
        GasOutput {
            states: self
                .states
                .into_iter()
                .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
                .collect(),
            metrics,
            max_cache_discrepancy: self.discrepancy.into_inner().unwrap_or_else(|e| e.into_inner()),
            schedule: self
                .log
                .map(|l| l.into_inner().unwrap_or_else(|e| e.into_inner()))
                .unwrap_or_default(),
        }
    }
}

/// Asynchronous GAS execution.
///
/// Vertices come off a FIFO queue; a vertex already waiting is not queued
/// twice. Each execution holds the locks of the vertex and all its
/// neighbors, so no two adjacent vertices run at the same time.
pub fn run_gas_async<P: GasProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    options: &AsyncOptions,
) -> Result<GasOutput<P::State>> {
    assignment.check_graph(graph)?;
    let started = Instant::now();
    let shared = Shared::new(graph, assignment, program, options);
    let initial = initial_queue(graph.num_vertices(), &options.order)?;
    let sched = Scheduler::new(graph.num_vertices(), initial, options.max_updates);
    let (mut metrics, limit) = sched.drive(options.mode, options.threads, |v, m| shared.execute(v, m))?;
    metrics.step_limit_reached = limit;
    Ok(shared.finish(metrics, started))
}

/// Executes vertices serially in exactly the given order, ignoring
/// signals. Replaying the schedule logged by a parallel run reproduces its
/// final states when the run was serializable.
pub fn replay_schedule<P: GasProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    options: &AsyncOptions,
    schedule: &[VertexId],
) -> Result<GasOutput<P::State>> {
    assignment.check_graph(graph)?;
    let started = Instant::now();
    let shared = Shared::new(graph, assignment, program, options);
    let mut metrics = RunMetrics::default();
    for &v in schedule {
        if v >= graph.num_vertices() {
            return Err(Error::argument(format!("scheduled vertex {v} is not in the graph")));
        }
        shared.execute(v, &mut metrics)?;
    }
    Ok(shared.finish(metrics, started))
}

