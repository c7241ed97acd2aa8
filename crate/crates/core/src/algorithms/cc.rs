use std::collections::BTreeMap;

use super::{edge_dataset, per_vertex, require_undirected, vertex_dataset, Algorithm, Engine, RunOptions};
use crate::cluster::{Combiner, MinCombiner, RunMetrics};
use crate::error::Result;
use crate::gas::{
    run_gas_async, run_gas_message, run_gas_sync, EdgeDir, GasProgram, MessageCtx, MessageEngine, MessageProgram,
    Nbr, ScatterCtx,
};
use crate::graph::{Graph, PartitionAssignment, VertexId};
use crate::graphcentric::{run_graph_centric, BlockCtx, BlockProgram, BlockView};
use crate::pact::{execute_dag, Aggregate, Convergence, FieldType, Plan, Value, NEXT, PARTIAL};
use crate::pregel::{run_pregel, Context, Vertex, VertexProgram};

/// Labels every vertex with the smallest id in its component.
pub fn connected_components(
    graph: &Graph,
    engine: Engine,
    assignment: &PartitionAssignment,
    options: &RunOptions,
) -> Result<(Vec<VertexId>, RunMetrics)> {
    Algorithm::Cc.check(engine)?;
    options.check_engine(engine)?;
    require_undirected(graph, "connected components")?;
    match engine {
        Engine::Pregel => {
            let out = run_pregel(graph, assignment, &PregelCc, &options.pregel())?;
            Ok((out.states, out.metrics))
        }
        Engine::GasSync => {
            let out = run_gas_sync(graph, assignment, &GasCc, &options.gas_sync())?;
            Ok((out.states, out.metrics))
        }
        Engine::GasAsync => {
            let out = run_gas_async(graph, assignment, &GasCc, &options.gas_async())?;
            Ok((out.states, out.metrics))
        }
        Engine::GasMessage => {
            let mut opts = options.gas_message();
            opts.engine = MessageEngine::Sync;
            let out = run_gas_message(graph, assignment, &MessageCc, &opts)?;
            Ok((out.states, out.metrics))
        }
        Engine::GraphCentric => {
            let out = run_graph_centric(graph, assignment, &BlockCc, &options.graph_centric())?;
            Ok((out.states, out.metrics))
        }
        Engine::Pact => pact_cc(graph, assignment.num_blocks(), options.max_supersteps),
    }
}

struct PregelCc;

impl VertexProgram for PregelCc {
    type State = VertexId;
    type Message = VertexId;

    fn name(&self) -> &str {
        "cc"
    }

    fn init(&self, v: VertexId, _: &Graph) -> VertexId {
        v
    }

    fn compute(&self, vertex: &mut Vertex<'_, VertexId>, messages: &[VertexId], ctx: &mut Context<'_, VertexId>) {
        if ctx.superstep() == 0 {
            ctx.send_to_all_neighbors(*vertex.value());
        } else if let Some(&m) = messages.iter().min() {
            if m < *vertex.value() {
                vertex.set_value(m);
                ctx.send_to_all_neighbors(m);
            }
        }
        ctx.vote_to_halt();
    }

    fn combiner(&self) -> Option<&dyn Combiner<VertexId>> {
        Some(&MinCombiner)
    }
}

struct GasCc;

impl GasProgram for GasCc {
    type State = VertexId;
    type Gather = VertexId;
    type EdgeData = ();
    type Scratch = bool;

    fn init(&self, v: VertexId, _: &Graph) -> VertexId {
        v
    }
    fn gather_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn scatter_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn gather(&self, _: &Graph, _: VertexId, _: &VertexId, nbr: Nbr<'_, VertexId, ()>) -> VertexId {
        *nbr.state
    }
    fn gather_sum(&self, a: VertexId, b: VertexId) -> VertexId {
        a.min(b)
    }
    fn apply(&self, _: &Graph, _: VertexId, state: &mut VertexId, acc: Option<VertexId>) -> bool {
        match acc {
            Some(m) if m < *state => {
                *state = m;
                true
            }
            _ => false,
        }
    }
    fn scatter(
        &self,
        _: &Graph,
        _: VertexId,
        _: &VertexId,
        changed: &bool,
        nbr: Nbr<'_, VertexId, ()>,
        ctx: &mut ScatterCtx<'_, VertexId, ()>,
    ) {
        if *changed {
            ctx.signal(nbr.id);
        }
    }
}

struct MessageCc;

impl MessageProgram for MessageCc {
    type State = VertexId;
    type Message = VertexId;
    type Scratch = bool;

    fn init(&self, v: VertexId, _: &Graph) -> VertexId {
        v
    }
    fn combine(&self, a: VertexId, b: VertexId) -> VertexId {
        a.min(b)
    }
    fn apply(&self, _: &Graph, _: VertexId, state: &mut VertexId, msg: Option<VertexId>, first: bool) -> bool {
        match msg {
            Some(m) if m < *state => {
                *state = m;
                true
            }
            _ => first,
        }
    }
    fn scatter(&self, graph: &Graph, v: VertexId, state: &VertexId, send: &bool, ctx: &mut MessageCtx<'_, VertexId>) {
        if *send {
            for &u in graph.neighbors(v) {
                ctx.send(u, *state);
            }
        }
    }
}

/// Per-block bookkeeping: local components of the block's own subgraph
/// and, per boundary vertex, an upper bound on its current label.
#[derive(Default)]
struct BlockComponents {
    /// Component index of every internal vertex.
    comp_of: BTreeMap<VertexId, usize>,
    members: Vec<Vec<VertexId>>,
    /// Cut edges leaving each component, as `(internal, boundary)`.
    cut: Vec<Vec<(VertexId, VertexId)>>,
    label: Vec<VertexId>,
    known: BTreeMap<VertexId, VertexId>,
}

/// Message: `(label, sender)`; the sender lets the receiver tighten its
/// bound on the sender's label.
struct BlockCc;

impl BlockProgram for BlockCc {
    type State = VertexId;
    type Message = (VertexId, VertexId);
    type BlockData = BlockComponents;

    fn init(&self, v: VertexId, _: &Graph) -> VertexId {
        v
    }

    fn compute(
        &self,
        block: &mut BlockView<'_, VertexId, BlockComponents>,
        messages: &[(VertexId, Vec<(VertexId, VertexId)>)],
        ctx: &mut BlockCtx<'_, (VertexId, VertexId)>,
    ) -> Result<()> {
        let mut dirty = Vec::new();
        if ctx.superstep() == 0 {
            let internal = block.internal().to_vec();
            let graph = block.graph();
            let mut comps = BlockComponents::default();
            // sequential flood fill over internal edges
            for &start in &internal {
                if comps.comp_of.contains_key(&start) {
                    continue;
                }
                let c = comps.members.len();
                let mut stack = vec![start];
                let mut members = Vec::new();
                let mut cut = Vec::new();
                comps.comp_of.insert(start, c);
                while let Some(x) = stack.pop() {
                    members.push(x);
                    for &y in graph.neighbors(x) {
                        if !block.is_internal(y) {
                            cut.push((x, y));
                        } else if let std::collections::btree_map::Entry::Vacant(e) = comps.comp_of.entry(y) {
                            e.insert(c);
                            stack.push(y);
                        }
                    }
                }
                members.sort_unstable();
                comps.label.push(members[0]);
                comps.members.push(members);
                comps.cut.push(cut);
                dirty.push(c);
            }
            for &b in block.boundary() {
                comps.known.insert(b, b);
            }
            *block.data_mut() = comps;
        } else {
            let data = block.data_mut();
            let mut best: BTreeMap<usize, VertexId> = BTreeMap::new();
            for (x, inbox) in messages {
                let c = data.comp_of[x];
                for &(label, from) in inbox {
                    let k = data.known.get_mut(&from).expect("sender is a boundary vertex");
                    *k = (*k).min(label);
                    let e = best.entry(c).or_insert(label);
                    *e = (*e).min(label);
                }
            }
            for (c, label) in best {
                if label < data.label[c] {
                    data.label[c] = label;
                    dirty.push(c);
                }
            }
        }
        for c in dirty {
            let label = block.data().label[c];
            for v in block.data().members[c].clone() {
                block.set(v, label)?;
            }
            let data = block.data_mut();
            for &(x, y) in &data.cut[c] {
                let k = data.known.get_mut(&y).expect("cut edges end at boundary vertices");
                if label < *k {
                    *k = label;
                    ctx.send_to_vertex(y, (label, x));
                }
            }
        }
        ctx.vote_to_halt();
        Ok(())
    }
}

fn pact_cc(graph: &Graph, parallelism: usize, max_iterations: u64) -> Result<(Vec<VertexId>, RunMetrics)> {
    use FieldType::Int;
    let mut body = Plan::new();
    let labels = body.source(PARTIAL, vec![Int, Int])?;
    let edges = body.source("edges", vec![Int, Int])?;
    let offered = body.join(labels, edges, &[0], &[0], vec![Int, Int], |l, e| {
        vec![vec![e[1].clone(), l[1].clone()]]
    })?;
    let all = body.union(offered, labels)?;
    let next = body.group(all, &[0], Aggregate::Min(1))?;
    body.sink(next, NEXT)?;

    let mut plan = Plan::new();
    let v = plan.source("vertices", vec![Int])?;
    let e = plan.source("edges", vec![Int, Int])?;
    let init = plan.map(v, vec![Int, Int], |t| vec![vec![t[0].clone(), t[0].clone()]])?;
    let out = plan.iterate(init, &[("edges", e)], body, max_iterations, Convergence::Unchanged)?;
    plan.sink(out, "labels")?;

    let sources = [
        ("vertices".to_string(), vertex_dataset(graph)),
        ("edges".to_string(), edge_dataset(graph)),
    ]
    .into_iter()
    .collect();
    let out = execute_dag(&plan, &sources, parallelism)?;
    let n = graph.num_vertices();
    let labels = per_vertex(n, &out.outputs["labels"], 0, |x: &Value| x.as_int().unwrap_or(0) as VertexId);
    Ok((labels, out.metrics))
}
