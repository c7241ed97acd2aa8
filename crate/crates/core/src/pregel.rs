//! Bulk-synchronous vertex-centric engine.
//!
//! Each superstep runs `compute` on every active vertex, worker by worker.
//! Messages sent during superstep `s` are buffered in the sender's outbox
//! and delivered at the start of `s + 1`. A vertex that votes to halt stays
//! inactive until a message arrives for it. The run ends when every vertex
//! is halted with no messages in flight, when master compute requests it,
//! or when the superstep budget is used up.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    exchange, AggPartials, AggValue, Aggregators, Checkpoint, CheckpointPolicy, Combiner,
    ExecMode, Outbox, RunMetrics, WireSize,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, PartitionAssignment, VertexId};

pub const DEFAULT_MAX_SUPERSTEPS: u64 = 10_000;

pub trait VertexProgram: Sync {
    type State: Clone + PartialEq + Send + Sync + Serialize + DeserializeOwned;
    type Message: Clone + Send + Sync + WireSize + Serialize + DeserializeOwned;

    /// Identifies the program in checkpoint tags.
    fn name(&self) -> &str;

    /// Vertex value before superstep 0.
    fn init(&self, vertex: VertexId, graph: &Graph) -> Self::State;

    fn compute(
        &self,
        vertex: &mut Vertex<'_, Self::State>,
        messages: &[Self::Message],
        ctx: &mut Context<'_, Self::Message>,
    );

    fn combiner(&self) -> Option<&dyn Combiner<Self::Message>> {
        None
    }

    fn register_aggregators(&self, _aggregators: &mut Aggregators) {}

    /// Runs once after every barrier, after aggregators are committed.
    fn master_compute(&self, _master: &mut MasterContext<'_>) {}
}

/// The vertex a `compute` call runs on. Only its own value is writable.
pub struct Vertex<'a, S> {
    id: VertexId,
    value: &'a mut S,
    graph: &'a Graph,
}

impl<'a, S> Vertex<'a, S> {
    pub fn id(&self) -> VertexId {
        self.id
    }

    pub fn value(&self) -> &S {
        self.value
    }

    pub fn value_mut(&mut self) -> &mut S {
        self.value
    }

    pub fn set_value(&mut self, value: S) {
        *self.value = value;
    }

    /// Out-degree; the degree for undirected graphs.
    pub fn num_edges(&self) -> usize {
        self.graph.out_degree(self.id)
    }

    pub fn neighbors(&self) -> &'a [VertexId] {
        self.graph.out_neighbors(self.id)
    }
}

pub struct Context<'a, M> {
    superstep: u64,
    graph: &'a Graph,
    vertex: VertexId,
    outbox: &'a mut Outbox<M>,
    aggregators: &'a Aggregators,
    partials: &'a mut AggPartials,
    halt: bool,
}

impl<M: Clone> Context<'_, M> {
    pub fn superstep(&self) -> u64 {
        self.superstep
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn send(&mut self, dst: VertexId, message: M) {
        self.outbox.send(dst, message);
    }

    /// Sends along every out-edge (every edge when undirected).
    pub fn send_to_all_neighbors(&mut self, message: M) {
        let neighbors = self.graph.out_neighbors(self.vertex);
        if let Some((&last, rest)) = neighbors.split_last() {
            for &dst in rest {
                self.outbox.send(dst, message.clone());
            }
            self.outbox.send(last, message);
        }
    }

    pub fn vote_to_halt(&mut self) {
        self.halt = true;
    }

    /// Value committed at the end of the previous superstep.
    pub fn aggregated(&self, name: &str) -> Option<AggValue> {
        self.aggregators.get(name)
    }

    pub fn aggregate(&mut self, name: &str, value: AggValue) {
        self.partials.contribute(name, value);
    }
}

pub struct MasterContext<'a> {
    superstep: u64,
    num_vertices: usize,
    aggregators: &'a Aggregators,
    records: &'a mut BTreeMap<String, f64>,
    halt: bool,
}

impl<'a> MasterContext<'a> {
    pub(crate) fn new(
        superstep: u64,
        num_vertices: usize,
        aggregators: &'a Aggregators,
        records: &'a mut BTreeMap<String, f64>,
    ) -> Self {
        MasterContext {
            superstep,
            num_vertices,
            aggregators,
            records,
            halt: false,
        }
    }

    pub(crate) fn halt_requested(&self) -> bool {
        self.halt
    }

    /// The superstep that just finished.
    pub fn superstep(&self) -> u64 {
        self.superstep
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Value committed at this barrier.
    pub fn aggregated(&self, name: &str) -> Option<AggValue> {
        self.aggregators.get(name)
    }

    pub fn halt_computation(&mut self) {
        self.halt = true;
    }

    /// Stores a named scalar result, returned in [`PregelOutput::records`].
    pub fn record(&mut self, name: &str, value: f64) {
        self.records.insert(name.to_owned(), value);
    }
}

#[derive(Debug, Clone)]
pub struct PregelConfig {
    pub max_supersteps: u64,
    pub mode: ExecMode,
    pub checkpoint: Option<CheckpointPolicy>,
    /// Simulates a worker crash at the start of this superstep. The run
    /// recovers from the latest checkpoint; without one it fails.
    pub kill_at_superstep: Option<u64>,
}

impl Default for PregelConfig {
    fn default() -> Self {
        PregelConfig {
            max_supersteps: DEFAULT_MAX_SUPERSTEPS,
            mode: ExecMode::Sequential,
            checkpoint: None,
            kill_at_superstep: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PregelOutput<S> {
    pub states: Vec<S>,
    pub metrics: RunMetrics,
    pub aggregates: BTreeMap<String, AggValue>,
    pub records: BTreeMap<String, f64>,
    pub halted_by_master: bool,
}

struct WorkerState<S, M> {
    worker: usize,
    vertices: Vec<VertexId>,
    states: Vec<S>,
    halted: Vec<bool>,
    inbox: Vec<Vec<M>>,
}

struct WorkerResult<S, M> {
    state: WorkerState<S, M>,
    outbox: Outbox<M>,
    partials: AggPartials,
    metrics: RunMetrics,
    active: u64,
}

#[derive(Serialize, Deserialize)]
struct Progress {
    next_superstep: u64,
    master_halted: bool,
    records: BTreeMap<String, f64>,
}

struct Run<'g, P: VertexProgram> {
    graph: &'g Graph,
    assignment: &'g PartitionAssignment,
    workers: Vec<WorkerState<P::State, P::Message>>,
    aggregators: Aggregators,
    metrics: RunMetrics,
    progress: Progress,
}

fn tag<P: VertexProgram>(program: &P) -> String {
    format!("pregel:{}", program.name())
}

impl<'g, P: VertexProgram> Run<'g, P> {
    fn fresh(graph: &'g Graph, assignment: &'g PartitionAssignment, program: &P) -> Self {
        let workers = assignment
            .blocks()
            .into_iter()
            .enumerate()
            .map(|(worker, vertices)| WorkerState {
                worker,
                states: vertices.iter().map(|&v| program.init(v, graph)).collect(),
                halted: vec![false; vertices.len()],
                inbox: vec![Vec::new(); vertices.len()],
                vertices,
            })
            .collect();
        let mut aggregators = Aggregators::new();
        program.register_aggregators(&mut aggregators);
        Run {
            graph,
            assignment,
            workers,
            aggregators,
            metrics: RunMetrics::default(),
            progress: Progress {
                next_superstep: 0,
                master_halted: false,
                records: BTreeMap::new(),
            },
        }
    }

    fn any_active(&self) -> bool {
        if self.progress.next_superstep == 0 {
            return self.graph.num_vertices() > 0;
        }
        self.workers.iter().any(|w| {
            w.halted
                .iter()
                .zip(&w.inbox)
                .any(|(&h, inbox)| !h || !inbox.is_empty())
        })
    }

    fn superstep(&mut self, program: &P, mode: ExecMode) -> Result<()> {
        let s = self.progress.next_superstep;
        let graph = self.graph;
        let aggregators = &self.aggregators;
        let workers = std::mem::take(&mut self.workers);

        let results = mode.map(workers, |mut w| {
            let mut outbox = Outbox::new(w.worker);
            let mut partials = aggregators.partials();
            let mut metrics = RunMetrics::default();
            let mut active = 0;
            for i in 0..w.vertices.len() {
                let messages = std::mem::take(&mut w.inbox[i]);
                if s > 0 && w.halted[i] && messages.is_empty() {
                    continue;
                }
                active += 1;
                let before = w.states[i].clone();
                let mut ctx = Context {
                    superstep: s,
                    graph,
                    vertex: w.vertices[i],
                    outbox: &mut outbox,
                    aggregators,
                    partials: &mut partials,
                    halt: false,
                };
                let mut vertex = Vertex {
                    id: w.vertices[i],
                    value: &mut w.states[i],
                    graph,
                };
                program.compute(&mut vertex, &messages, &mut ctx);
                w.halted[i] = ctx.halt;
                metrics.compute_calls += 1;
                if w.states[i] != before {
                    metrics.vertex_updates += 1;
                }
            }
            partials.compact(aggregators);
            WorkerResult {
                state: w,
                outbox,
                partials,
                metrics,
                active,
            }
        });

        let mut outboxes = Vec::with_capacity(results.len());
        let mut partials = Vec::with_capacity(results.len());
        let mut active = 0;
        for r in results {
            self.metrics.absorb(&r.metrics);
            active += r.active;
            outboxes.push(r.outbox);
            partials.push(r.partials);
            self.workers.push(r.state);
        }
        self.metrics.active_vertices_per_superstep.push(active);

        let mut inboxes = exchange(outboxes, program.combiner(), self.assignment, &mut self.metrics)?;
        for w in &mut self.workers {
            for (i, &v) in w.vertices.iter().enumerate() {
                w.inbox[i] = std::mem::take(&mut inboxes[v]);
            }
        }

        self.aggregators.commit(partials)?;
        let mut master = MasterContext {
            superstep: s,
            num_vertices: graph.num_vertices(),
            aggregators: &self.aggregators,
            records: &mut self.progress.records,
            halt: false,
        };
        program.master_compute(&mut master);
        self.progress.master_halted = master.halt;
        self.metrics.supersteps += 1;
        self.progress.next_superstep = s + 1;
        Ok(())
    }

    fn snapshot(&self, program: &P) -> Result<Checkpoint> {
        let n = self.graph.num_vertices();
        let mut states: Vec<Option<P::State>> = vec![None; n];
        let mut halted = vec![false; n];
        let mut inboxes: Vec<Vec<P::Message>> = vec![Vec::new(); n];
        for w in &self.workers {
            for (i, &v) in w.vertices.iter().enumerate() {
                states[v] = Some(w.states[i].clone());
                halted[v] = w.halted[i];
                inboxes[v] = w.inbox[i].clone();
            }
        }
        let states: Vec<P::State> = states.into_iter().map(|s| s.expect("owned")).collect();
        let mut ck = Checkpoint::new(tag(program), self.progress.next_superstep - 1);
        ck.put("owners", self.assignment.owners())?;
        ck.put("states", &states)?;
        ck.put("halted", &halted)?;
        ck.put("mailboxes", &inboxes)?;
        ck.put("aggregators", &self.aggregators)?;
        ck.put("metrics", &self.metrics)?;
        ck.put("progress", &self.progress)?;
        Ok(ck)
    }

    fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        let owners: Vec<usize> = ck.get("owners")?;
        if owners != self.assignment.owners() {
            return Err(Error::Restore {
                path: Default::default(),
                message: "checkpoint was taken under a different partition".into(),
            });
        }
        let states: Vec<P::State> = ck.get("states")?;
        let halted: Vec<bool> = ck.get("halted")?;
        let mut inboxes: Vec<Vec<P::Message>> = ck.get("mailboxes")?;
        let n = self.graph.num_vertices();
        if states.len() != n || halted.len() != n || inboxes.len() != n {
            return Err(Error::Restore {
                path: Default::default(),
                message: "checkpoint does not match the graph size".into(),
            });
        }
        for w in &mut self.workers {
            for (i, &v) in w.vertices.iter().enumerate() {
                w.states[i] = states[v].clone();
                w.halted[i] = halted[v];
                w.inbox[i] = std::mem::take(&mut inboxes[v]);
            }
        }
        self.aggregators = ck.get("aggregators")?;
        let recoveries = self.metrics.recoveries;
        self.metrics = ck.get("metrics")?;
        self.metrics.recoveries = recoveries;
        self.progress = ck.get("progress")?;
        Ok(())
    }

    fn into_output(self) -> PregelOutput<P::State> {
        let n = self.graph.num_vertices();
        let mut states: Vec<Option<P::State>> = vec![None; n];
        for w in self.workers {
            for (v, s) in w.vertices.into_iter().zip(w.states) {
                states[v] = Some(s);
            }
        }
        PregelOutput {
            states: states.into_iter().map(|s| s.expect("owned")).collect(),
            metrics: self.metrics,
            aggregates: self.aggregators.values().clone(),
            records: self.progress.records,
            halted_by_master: self.progress.master_halted,
        }
    }
}

pub fn run_pregel<P: VertexProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    config: &PregelConfig,
) -> Result<PregelOutput<P::State>> {
    assignment.check_graph(graph)?;
    let run = Run::fresh(graph, assignment, program);
    drive(run, program, config)
}

/// Continues a run from a checkpoint file written by the same program.
pub fn resume_pregel<P: VertexProgram>(
    graph: &Graph,
    assignment: &PartitionAssignment,
    program: &P,
    config: &PregelConfig,
    checkpoint: &std::path::Path,
) -> Result<PregelOutput<P::State>> {
    assignment.check_graph(graph)?;
    let ck = Checkpoint::read(checkpoint, &tag(program))?;
    let mut run = Run::fresh(graph, assignment, program);
    run.restore(&ck).map_err(|e| relabel_restore(e, checkpoint))?;
    drive(run, program, config)
}

fn relabel_restore(e: Error, path: &std::path::Path) -> Error {
    match e {
        Error::Restore { message, .. } => Error::Restore {
            path: path.to_owned(),
            message,
        },
        other => other,
    }
}

fn drive<P: VertexProgram>(
    mut run: Run<'_, P>,
    program: &P,
    config: &PregelConfig,
) -> Result<PregelOutput<P::State>> {
    if config.max_supersteps == 0 {
        return Err(Error::argument("max_supersteps must be at least 1"));
    }
    let started = Instant::now();
    let mut kill = config.kill_at_superstep;
    loop {
        if run.progress.master_halted || !run.any_active() {
            break;
        }
        let s = run.progress.next_superstep;
        if s >= config.max_supersteps {
            run.metrics.step_limit_reached = true;
            break;
        }
        if kill == Some(s) {
            kill = None;
            let latest = config.checkpoint.as_ref().and_then(CheckpointPolicy::latest);
            let Some(path) = latest else {
                return Err(Error::WorkerFailure { superstep: s });
            };
            log::info!("worker failure at superstep {s}, recovering from {}", path.display());
            let ck = Checkpoint::read(&path, &tag(program))?;
            run.restore(&ck).map_err(|e| relabel_restore(e, &path))?;
            run.metrics.recoveries += 1;
            continue;
        }
        run.superstep(program, config.mode)?;
        if let Some(policy) = &config.checkpoint {
            if policy.due(s) {
                let path = policy.path_for(s);
                let written = run.snapshot(program).and_then(|ck| ck.write_atomic(&path));
                if let Err(e) = written {
                    if policy.strict {
                        return Err(e);
                    }
                    log::warn!("checkpoint after superstep {s} skipped: {e}");
                }
            }
        }
    }
    run.metrics.wall_time = started.elapsed();
    Ok(run.into_output())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{AggOp, MinCombiner};
    use crate::graph::{partition_hash, path};

    /// Min-label propagation that always votes to halt.
    struct MinLabel {
        combine: bool,
    }

    impl VertexProgram for MinLabel {
        type State = usize;
        type Message = usize;

        fn name(&self) -> &str {
            "min-label"
        }

        fn init(&self, v: VertexId, _: &Graph) -> usize {
            v
        }

        fn compute(&self, vertex: &mut Vertex<'_, usize>, messages: &[usize], ctx: &mut Context<'_, usize>) {
            let improved = match messages.iter().min() {
                Some(&m) if m < *vertex.value() => {
                    vertex.set_value(m);
                    true
                }
                _ => false,
            };
            if ctx.superstep() == 0 || improved {
                ctx.send_to_all_neighbors(*vertex.value());
            }
            ctx.aggregate("active", AggValue::Int(1));
            ctx.vote_to_halt();
        }

        fn combiner(&self) -> Option<&dyn Combiner<usize>> {
            self.combine.then_some(&MinCombiner as &dyn Combiner<usize>)
        }

        fn register_aggregators(&self, aggregators: &mut Aggregators) {
            aggregators.register("active", AggOp::IntSum);
        }

        fn master_compute(&self, master: &mut MasterContext<'_>) {
            let n = master.aggregated("active").and_then(AggValue::as_i64).unwrap();
            master.record(&format!("active{}", master.superstep()), n as f64);
        }
    }

    #[test]
    fn empty_graph_halts_immediately() {
        let g = Graph::from_edges(0, false, &[]);
        let out = run_pregel(&g, &PartitionAssignment::single(0), &MinLabel { combine: false }, &PregelConfig::default()).unwrap();
        assert_eq!(out.metrics.compute_calls, 0);
        assert_eq!(out.metrics.supersteps, 0);
    }

    #[test]
    fn supersteps_isolate_messages() {
        // on a path the label of vertex 0 moves one hop per superstep
        let g = path(5);
        let out = run_pregel(&g, &PartitionAssignment::single(5), &MinLabel { combine: false }, &PregelConfig::default()).unwrap();
        assert_eq!(out.states, vec![0; 5]);
        assert_eq!(out.metrics.supersteps, 6);
        assert_eq!(out.records["active0"], 5.0);
        assert_eq!(out.metrics.active_vertices_per_superstep[0], 5);
    }

    #[test]
    fn step_limit_is_flagged_not_an_error() {
        let g = path(10);
        let cfg = PregelConfig {
            max_supersteps: 3,
            ..Default::default()
        };
        let out = run_pregel(&g, &PartitionAssignment::single(10), &MinLabel { combine: false }, &cfg).unwrap();
        assert!(out.metrics.step_limit_reached);
        assert_eq!(out.metrics.supersteps, 3);
        assert_eq!(out.states[3], 1);
    }

    #[test]
    fn worker_count_and_mode_do_not_change_states() {
        let g = crate::graph::erdos_renyi(120, 0.02, false, 5);
        let base = run_pregel(&g, &PartitionAssignment::single(120), &MinLabel { combine: false }, &PregelConfig::default()).unwrap();
        for k in [2, 4, 8] {
            for combine in [false, true] {
                for mode in [ExecMode::Sequential, ExecMode::Parallel] {
                    let p = partition_hash(&g, k, 1).unwrap();
                    let cfg = PregelConfig { mode, ..Default::default() };
                    let out = run_pregel(&g, &p, &MinLabel { combine }, &cfg).unwrap();
                    assert_eq!(out.states, base.states);
                    assert_eq!(out.metrics.supersteps, base.metrics.supersteps);
                    if combine {
                        assert!(out.metrics.messages_delivered <= base.metrics.messages_delivered);
                    }
                }
            }
        }
    }

    #[test]
    fn sending_to_missing_vertex_is_a_routing_error() {
        struct Bad;
        impl VertexProgram for Bad {
            type State = ();
            type Message = u64;
            fn name(&self) -> &str {
                "bad"
            }
            fn init(&self, _: VertexId, _: &Graph) {}
            fn compute(&self, _: &mut Vertex<'_, ()>, _: &[u64], ctx: &mut Context<'_, u64>) {
                ctx.send(99, 1);
            }
        }
        let g = path(2);
        let err = run_pregel(&g, &PartitionAssignment::single(2), &Bad, &PregelConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Routing { dst: 99, .. }));
    }

    #[test]
    fn checkpoint_then_resume_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let g = path(12);
        let p = partition_hash(&g, 3, 0).unwrap();
        let prog = MinLabel { combine: true };
        let plain = run_pregel(&g, &p, &prog, &PregelConfig::default()).unwrap();
        let cfg = PregelConfig {
            checkpoint: Some(CheckpointPolicy::new(dir.path(), 1).strict()),
            ..Default::default()
        };
        let with_ck = run_pregel(&g, &p, &prog, &cfg).unwrap();
        assert_eq!(with_ck.states, plain.states);
        let files = std::fs::read_dir(dir.path()).unwrap().count() as u64;
        assert_eq!(files, plain.metrics.supersteps);

        let mid = cfg.checkpoint.as_ref().unwrap().path_for(4);
        let resumed = resume_pregel(&g, &p, &prog, &PregelConfig::default(), &mid).unwrap();
        assert_eq!(resumed.states, plain.states);
        let mut a = resumed.metrics.clone();
        let mut b = plain.metrics.clone();
        a.wall_time = Default::default();
        b.wall_time = Default::default();
        assert_eq!(a, b);
        assert_eq!(resumed.records, plain.records);

        struct Other;
        impl VertexProgram for Other {
            type State = usize;
            type Message = usize;
            fn name(&self) -> &str {
                "other"
            }
            fn init(&self, v: VertexId, _: &Graph) -> usize {
                v
            }
            fn compute(&self, _: &mut Vertex<'_, usize>, _: &[usize], _: &mut Context<'_, usize>) {}
        }
        assert!(matches!(
            resume_pregel(&g, &p, &Other, &PregelConfig::default(), &mid),
            Err(Error::Restore { .. })
        ));
    }

    #[test]
    fn kill_without_checkpoint_fails() {
        let g = path(12);
        let cfg = PregelConfig {
            kill_at_superstep: Some(3),
            ..Default::default()
        };
        let err = run_pregel(&g, &PartitionAssignment::single(12), &MinLabel { combine: false }, &cfg).unwrap_err();
        assert!(matches!(err, Error::WorkerFailure { superstep: 3 }));
    }
}
