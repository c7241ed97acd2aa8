use std::collections::BTreeMap;

use rand::Rng;

use super::{edge_dataset, per_vertex, require_undirected, vertex_rng, Algorithm, Engine, RunOptions};
use crate::cluster::{AggOp, AggValue, Aggregators, RunMetrics};
use crate::error::Result;
use crate::gas::{run_gas_async, run_gas_sync, EdgeDir, GasProgram, Nbr, ScatterCtx};
use crate::graph::{Graph, PartitionAssignment, VertexId};
use crate::graphcentric::{run_graph_centric, BlockCtx, BlockProgram, BlockView};
use crate::pact::{execute_dag, Aggregate, Convergence, Dataset, FieldType, Plan, Value, NEXT, PARTIAL};
use crate::pregel::{run_pregel, Context, MasterContext, Vertex, VertexProgram};

#[derive(Debug, Clone)]
pub struct CommunityResult {
    pub labels: Vec<VertexId>,
    /// A round changed nothing before `max_rounds` ran out.
    pub converged: bool,
    /// Not converged, and two more synchronous rounds would restore the
    /// final labels: the period-2 swing synchronous propagation falls into.
    pub oscillating: bool,
    /// Update rounds executed, including the final unchanged one.
    pub rounds: u64,
    pub metrics: RunMetrics,
}

const CHANGED: &str = "changed";

/// Label propagation: every vertex adopts the most frequent label among
/// its neighbors, ties going to the smaller label. Labels start as the id
/// of a neighbor drawn from a per-vertex generator; isolated vertices keep
/// their own id.
///
/// The synchronous engines all compute the same rounds and so agree
/// exactly. `gas-async` updates in place and reaches a fixpoint where each
/// label is the most frequent around its vertex.
pub fn community_detection_lp(
    graph: &Graph,
    engine: Engine,
    assignment: &PartitionAssignment,
    max_rounds: u64,
    options: &RunOptions,
) -> Result<CommunityResult> {
    Algorithm::Community.check(engine)?;
    options.check_engine(engine)?;
    require_undirected(graph, "community detection")?;
    let seed = options.seed;
    let (labels, converged, rounds, metrics) = match engine {
        Engine::Pregel => {
            let mut config = options.pregel();
            config.max_supersteps = max_rounds.saturating_add(1);
            let out = run_pregel(graph, assignment, &PregelLp { seed }, &config)?;
            let converged = !out.metrics.step_limit_reached;
            let rounds = out.metrics.supersteps.saturating_sub(1);
            (out.states, converged, rounds, out.metrics)
        }
        Engine::GasSync => {
            let mut opts = options.gas_sync();
            opts.max_iterations = max_rounds;
            let out = run_gas_sync(graph, assignment, &GasLp { seed }, &opts)?;
            let m = out.metrics;
            (out.states, !m.step_limit_reached, m.supersteps, m)
        }
        Engine::GasAsync => {
            let out = run_gas_async(graph, assignment, &GasLp { seed }, &options.gas_async())?;
            let m = out.metrics;
            (out.states, !m.step_limit_reached, m.supersteps, m)
        }
        Engine::GraphCentric => {
            let mut config = options.graph_centric();
            config.max_supersteps = max_rounds.saturating_add(1);
            let out = run_graph_centric(graph, assignment, &BlockLp { seed }, &config)?;
            let converged = !out.metrics.step_limit_reached;
            let rounds = out.metrics.supersteps.saturating_sub(1);
            (out.states, converged, rounds, out.metrics)
        }
        Engine::Pact => pact_lp(graph, assignment.num_blocks(), max_rounds, seed)?,
        Engine::GasMessage => unreachable!("rejected by check"),
    };
    let oscillating = !converged && {
        let once = jacobi_round(graph, &labels);
        once != labels && jacobi_round(graph, &once) == labels
    };
    Ok(CommunityResult {
        labels,
        converged,
        oscillating,
        rounds,
        metrics,
    })
}

pub(crate) fn initial_label(graph: &Graph, v: VertexId, seed: u64) -> VertexId {
    let nbrs = graph.neighbors(v);
    if nbrs.is_empty() {
        v
    } else {
        nbrs[vertex_rng(seed, v).random_range(0..nbrs.len())]
    }
}

/// Most frequent entry, ties to the smallest. Sorts its input.
fn most_frequent(labels: &mut [VertexId]) -> Option<VertexId> {
    labels.sort_unstable();
    let mut best: Option<(usize, VertexId)> = None;
    for run in labels.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(c, _)| run.len() > c) {
            best = Some((run.len(), run[0]));
        }
    }
    best.map(|(_, l)| l)
}

/// One synchronous round applied centrally.
pub(crate) fn jacobi_round(graph: &Graph, labels: &[VertexId]) -> Vec<VertexId> {
    graph
        .vertices()
        .map(|v| {
            let mut around: Vec<VertexId> = graph.neighbors(v).iter().map(|&u| labels[u]).collect();
            most_frequent(&mut around).unwrap_or(labels[v])
        })
        .collect()
}

/// True when every non-isolated vertex holds one of the most frequent
/// labels among its neighbors.
pub fn is_lp_fixpoint(graph: &Graph, labels: &[VertexId]) -> bool {
    graph.vertices().all(|v| {
        let mut counts: BTreeMap<VertexId, usize> = BTreeMap::new();
        for &u in graph.neighbors(v) {
            *counts.entry(labels[u]).or_default() += 1;
        }
        let top = counts.values().copied().max();
        top.is_none_or(|top| counts.get(&labels[v]) == Some(&top))
    })
}

struct PregelLp {
    seed: u64,
}

impl VertexProgram for PregelLp {
    type State = VertexId;
    type Message = VertexId;

    fn name(&self) -> &str {
        "community"
    }

    fn init(&self, v: VertexId, graph: &Graph) -> VertexId {
        initial_label(graph, v, self.seed)
    }

    fn compute(&self, vertex: &mut Vertex<'_, VertexId>, messages: &[VertexId], ctx: &mut Context<'_, VertexId>) {
        if ctx.superstep() > 0 {
            let mut received = messages.to_vec();
            if let Some(label) = most_frequent(&mut received) {
                if label != *vertex.value() {
                    vertex.set_value(label);
                    ctx.aggregate(CHANGED, AggValue::Int(1));
                }
            }
        }
        // neighbors need the full label multiset every round
        ctx.send_to_all_neighbors(*vertex.value());
    }

    fn register_aggregators(&self, aggregators: &mut Aggregators) {
        aggregators.register(CHANGED, AggOp::IntSum);
    }

    fn master_compute(&self, master: &mut MasterContext<'_>) {
        if master.superstep() > 0 && master.aggregated(CHANGED) == Some(AggValue::Int(0)) {
            master.halt_computation();
        }
    }
}

struct GasLp {
    seed: u64,
}

/// Sorted `(label, count)` pairs.
type Histogram = Vec<(VertexId, u32)>;

impl GasProgram for GasLp {
    type State = VertexId;
    type Gather = Histogram;
    type EdgeData = ();
    type Scratch = bool;

    fn init(&self, v: VertexId, graph: &Graph) -> VertexId {
        initial_label(graph, v, self.seed)
    }
    fn gather_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn scatter_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn gather(&self, _: &Graph, _: VertexId, _: &VertexId, nbr: Nbr<'_, VertexId, ()>) -> Histogram {
        vec![(*nbr.state, 1)]
    }
    fn gather_sum(&self, a: Histogram, b: Histogram) -> Histogram {
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        out
    }
    fn apply(&self, _: &Graph, _: VertexId, state: &mut VertexId, acc: Option<Histogram>) -> bool {
        let Some(hist) = acc else { return false };
        let mut best = (0, VertexId::MAX);
        for (label, count) in hist {
            if count > best.0 {
                best = (count, label);
            }
        }
        let changed = best.1 != *state;
        *state = best.1;
        changed
    }
    fn scatter(
        &self,
        _: &Graph,
        _: VertexId,
        _: &VertexId,
        changed: &bool,
        nbr: Nbr<'_, VertexId, ()>,
        ctx: &mut ScatterCtx<'_, Histogram, ()>,
    ) {
        if *changed {
            ctx.signal(nbr.id);
        }
    }
}

/// Labels of neighbors in other blocks, as last reported.
#[derive(Default)]
struct RemoteLabels(BTreeMap<VertexId, VertexId>);

struct BlockLp {
    seed: u64,
}

impl BlockLp {
    /// Reports `x`'s label once to every other block holding a neighbor.
    fn publish(&self, block: &BlockView<'_, VertexId, RemoteLabels>, x: VertexId, label: VertexId, ctx: &mut BlockCtx<'_, (VertexId, VertexId)>) {
        let mut targets: BTreeMap<usize, VertexId> = BTreeMap::new();
        for &y in block.graph().neighbors(x) {
            if !block.is_internal(y) {
                targets.entry(block.owner_of(y)).or_insert(y);
            }
        }
        for (_, y) in targets {
            ctx.send_to_vertex(y, (x, label));
        }
    }
}

impl BlockProgram for BlockLp {
    type State = VertexId;
    type Message = (VertexId, VertexId);
    type BlockData = RemoteLabels;

    fn init(&self, v: VertexId, graph: &Graph) -> VertexId {
        initial_label(graph, v, self.seed)
    }

    fn compute(
        &self,
        block: &mut BlockView<'_, VertexId, RemoteLabels>,
        messages: &[(VertexId, Vec<(VertexId, VertexId)>)],
        ctx: &mut BlockCtx<'_, (VertexId, VertexId)>,
    ) -> Result<()> {
        let internal = block.internal().to_vec();
        if ctx.superstep() == 0 {
            for &x in &internal {
                let label = *block.get(x)?;
                self.publish(block, x, label, ctx);
            }
            return Ok(());
        }
        for (_, inbox) in messages {
            for &(x, label) in inbox {
                block.data_mut().0.insert(x, label);
            }
        }
        // synchronous within the block too, so results match the other
        // round-based engines
        let old: BTreeMap<VertexId, VertexId> = internal.iter().map(|&v| (v, *block.get(v).unwrap())).collect();
        let mut changed = Vec::new();
        for &v in &internal {
            let mut around: Vec<VertexId> = block
                .graph()
                .neighbors(v)
                .iter()
                .map(|u| old.get(u).or_else(|| block.data().0.get(u)).copied().expect("neighbor label known"))
                .collect();
            if let Some(label) = most_frequent(&mut around) {
                if label != old[&v] {
                    block.set(v, label)?;
                    changed.push((v, label));
                }
            }
        }
        for &(v, label) in &changed {
            self.publish(block, v, label, ctx);
        }
        if changed.is_empty() {
            ctx.vote_to_halt();
        }
        Ok(())
    }
}

fn pact_lp(graph: &Graph, parallelism: usize, max_rounds: u64, seed: u64) -> Result<(Vec<VertexId>, bool, u64, RunMetrics)> {
    use FieldType::Int;
    let n = graph.num_vertices();
    if max_rounds == 0 {
        let labels = graph.vertices().map(|v| initial_label(graph, v, seed)).collect();
        return Ok((labels, false, 0, RunMetrics::default()));
    }
    let mut body = Plan::new();
    let labels = body.source(PARTIAL, vec![Int, Int])?;
    let edges = body.source("edges", vec![Int, Int])?;
    let isolated = body.source("isolated", vec![Int])?;
    let heard = body.join(labels, edges, &[0], &[0], vec![Int, Int], |l, e| {
        vec![vec![e[1].clone(), l[1].clone()]]
    })?;
    let voted = body.group(heard, &[0], Aggregate::MostFrequent(1))?;
    let kept = body.join(labels, isolated, &[0], &[0], vec![Int, Int], |l, _| vec![l.to_vec()])?;
    let next = body.union(voted, kept)?;
    body.sink(next, NEXT)?;

    let mut plan = Plan::new();
    let init = plan.source("init", vec![Int, Int])?;
    let e = plan.source("edges", vec![Int, Int])?;
    let iso = plan.source("isolated", vec![Int])?;
    let out = plan.iterate(init, &[("edges", e), ("isolated", iso)], body, max_rounds, Convergence::Unchanged)?;
    plan.sink(out, "labels")?;

    let init = graph
        .vertices()
        .map(|v| vec![Value::Int(v as i64), Value::Int(initial_label(graph, v, seed) as i64)])
        .collect();
    let isolated = graph
        .vertices()
        .filter(|&v| graph.degree(v) == 0)
        .map(|v| vec![Value::Int(v as i64)])
        .collect();
    let sources = [
        ("init".to_string(), Dataset::new(vec![Int, Int], init)?),
        ("edges".to_string(), edge_dataset(graph)),
        ("isolated".to_string(), Dataset::new(vec![Int], isolated)?),
    ]
    .into_iter()
    .collect();
    let out = execute_dag(&plan, &sources, parallelism)?;
    let labels = per_vertex(n, &out.outputs["labels"], 0, |x: &Value| x.as_int().unwrap_or(0) as VertexId);
    let report = out.iterations[0];
    Ok((labels, report.converged, report.iterations, out.metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi, partition_hash, path};

    #[test]
    fn ties_go_to_the_smaller_label() {
        assert_eq!(most_frequent(&mut [5, 3, 5, 3, 9]), Some(3));
        assert_eq!(most_frequent(&mut [7, 7, 1]), Some(7));
        assert_eq!(most_frequent(&mut []), None);
    }

    #[test]
    fn single_edge_oscillates_synchronously() {
        let g = path(2);
        let p = PartitionAssignment::single(2);
        for engine in [Engine::Pregel, Engine::GasSync, Engine::GraphCentric, Engine::Pact] {
            let r = community_detection_lp(&g, engine, &p, 20, &RunOptions::default()).unwrap();
            assert!(!r.converged, "{engine}");
            assert!(r.oscillating, "{engine}");
            assert_eq!(r.rounds, 20, "{engine}");
        }
        let r = community_detection_lp(&g, Engine::GasAsync, &p, 20, &RunOptions::default()).unwrap();
        assert!(r.converged && !r.oscillating);
        assert_eq!(r.labels[0], r.labels[1]);
    }

    #[test]
    fn synchronous_engines_agree() {
        for seed in 0..6 {
            let g = erdos_renyi(60, 0.08, false, seed);
            let p = partition_hash(&g, 3, seed).unwrap();
            let opts = RunOptions::seeded(seed);
            let base = community_detection_lp(&g, Engine::Pregel, &p, 50, &opts).unwrap();
            for engine in [Engine::GasSync, Engine::GraphCentric, Engine::Pact] {
                let r = community_detection_lp(&g, engine, &p, 50, &opts).unwrap();
                assert_eq!(r.labels, base.labels, "{engine} seed={seed}");
                assert_eq!(r.converged, base.converged, "{engine} seed={seed}");
            }
            let a = community_detection_lp(&g, Engine::GasAsync, &p, 50, &opts).unwrap();
            assert!(a.converged);
            assert!(is_lp_fixpoint(&g, &a.labels));
        }
    }

    #[test]
    fn isolated_vertices_keep_their_id() {
        let g = Graph::from_edges(4, false, &[(0, 1)]);
        for engine in Algorithm::Community.engines() {
            let r = community_detection_lp(&g, *engine, &PartitionAssignment::single(4), 5, &RunOptions::default()).unwrap();
            assert_eq!(&r.labels[2..], &[2, 3], "{engine}");
        }
    }
}
