use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{edge_dataset, per_vertex, require_undirected, vertex_rng, Algorithm, Engine, RunOptions};
use crate::cluster::{AggOp, AggValue, Aggregators, ExactSum, RunMetrics};
use crate::error::{Error, Result};
use crate::gas::{run_gas_message, run_gas_sync, EdgeDir, GasProgram, MessageCtx, MessageEngine, MessageProgram, Nbr, ScatterCtx};
use crate::graph::{Graph, PartitionAssignment, VertexId};
use crate::graphcentric::{run_graph_centric, BlockCtx, BlockProgram, BlockView};
use crate::pact::{execute_dag, Aggregate, Dataset, FieldType, Plan, Value};
use crate::pregel::{run_pregel, Context, Vertex, VertexProgram};

/// Neighbor ids exchanged by exact counting, Σ deg(v)². Above this the run
/// is refused instead of exhausting memory.
pub const DEFAULT_RESOURCE_LIMIT: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// δ(v): triangles through v.
    pub triangles: Vec<u64>,
    /// δ(v)/τ(v), for vertices of degree at least two.
    pub local: Vec<Option<f64>>,
    /// C(G), the mean local coefficient over those vertices.
    pub average_local: f64,
    /// 3·triangles / connected triplets.
    pub global: f64,
    pub total_triangles: u64,
    pub triplets: u64,
}

impl ClusteringResult {
    /// Derives every coefficient from the per-vertex triangle counts.
    pub fn from_triangles(graph: &Graph, triangles: Vec<u64>) -> Self {
        let mut local = vec![None; graph.num_vertices()];
        let mut local_sum = ExactSum::ZERO;
        let mut qualifying = 0u64;
        let mut delta_sum = 0u64;
        let mut triplets = 0u64;
        for v in graph.vertices() {
            let d = graph.degree(v) as u64;
            delta_sum += triangles[v];
            if d >= 2 {
                let tau = d * (d - 1) / 2;
                let c = triangles[v] as f64 / tau as f64;
                local[v] = Some(c);
                local_sum += ExactSum::from_f64(c);
                qualifying += 1;
                triplets += tau;
            }
        }
        ClusteringResult {
            average_local: if qualifying == 0 { 0.0 } else { local_sum.to_f64() / qualifying as f64 },
            global: if triplets == 0 { 0.0 } else { delta_sum as f64 / triplets as f64 },
            total_triangles: delta_sum / 3,
            triplets,
            local,
            triangles,
        }
    }
}

/// Exact triangle counting by neighborhood exchange: every vertex ships its
/// adjacency list across each of its edges, so traffic grows as Σ deg(v)².
pub fn clustering_exact(
    graph: &Graph,
    engine: Engine,
    assignment: &PartitionAssignment,
    options: &RunOptions,
) -> Result<(ClusteringResult, RunMetrics)> {
    clustering_exact_with_limit(graph, engine, assignment, options, DEFAULT_RESOURCE_LIMIT)
}

pub fn clustering_exact_with_limit(
    graph: &Graph,
    engine: Engine,
    assignment: &PartitionAssignment,
    options: &RunOptions,
    limit: u64,
) -> Result<(ClusteringResult, RunMetrics)> {
    Algorithm::ClusteringExact.check(engine)?;
    options.check_engine(engine)?;
    require_undirected(graph, "clustering")?;
    let volume: u64 = graph.vertices().map(|v| (graph.degree(v) as u64).pow(2)).sum();
    if volume > limit {
        return Err(Error::Resource(format!(
            "exact clustering would exchange {volume} neighbor ids, above the limit of {limit}"
        )));
    }
    let (triangles, metrics) = match engine {
        Engine::Pregel => {
            let out = run_pregel(graph, assignment, &PregelTriangles, &options.pregel())?;
            (out.states, out.metrics)
        }
        Engine::GasSync => {
            let out = run_gas_sync(graph, assignment, &GasTriangles, &options.gas_sync())?;
            (out.states.into_iter().map(|s| s.triangles).collect(), out.metrics)
        }
        Engine::GraphCentric => {
            let out = run_graph_centric(graph, assignment, &BlockTriangles, &options.graph_centric())?;
            (out.states, out.metrics)
        }
        Engine::Pact => pact_triangles(graph, assignment.num_blocks())?,
        _ => unreachable!("rejected by check"),
    };
    Ok((ClusteringResult::from_triangles(graph, triangles), metrics))
}

fn common(a: &[VertexId], b: &[VertexId]) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn merge(a: Vec<VertexId>, b: Vec<VertexId>) -> Vec<VertexId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

const LOCAL_SUM: &str = "local_sum";

/// Superstep 0 sends N(v) over every edge; superstep 1 intersects. Each
/// triangle at v is seen from both of its other corners, hence the halving.
struct PregelTriangles;

impl VertexProgram for PregelTriangles {
    type State = u64;
    type Message = Vec<VertexId>;

    fn name(&self) -> &str {
        "clustering-exact"
    }

    fn init(&self, _: VertexId, _: &Graph) -> u64 {
        0
    }

    fn compute(&self, vertex: &mut Vertex<'_, u64>, messages: &[Vec<VertexId>], ctx: &mut Context<'_, Vec<VertexId>>) {
        if ctx.superstep() == 0 {
            let own = vertex.neighbors().to_vec();
            ctx.send_to_all_neighbors(own);
        } else {
            let own = vertex.neighbors();
            let hits: u64 = messages.iter().map(|m| common(own, m)).sum();
            let delta = hits / 2;
            vertex.set_value(delta);
            let d = own.len() as u64;
            if d >= 2 {
                let c = delta as f64 / (d * (d - 1) / 2) as f64;
                ctx.aggregate(LOCAL_SUM, AggValue::Sum(ExactSum::from_f64(c)));
            }
        }
        ctx.vote_to_halt();
    }

    fn register_aggregators(&self, aggregators: &mut Aggregators) {
        aggregators.register_sticky(LOCAL_SUM, AggOp::FloatSum);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TriangleState {
    neighbors: Vec<VertexId>,
    triangles: u64,
    collected: bool,
}

/// Two GAS rounds. The first gathers each adjacency list and scatters
/// |N(v) ∩ N(u)| onto every edge; the second sums the edge values.
struct GasTriangles;

impl GasProgram for GasTriangles {
    type State = TriangleState;
    type Gather = (Vec<VertexId>, u64);
    type EdgeData = u64;
    type Scratch = bool;

    fn init(&self, _: VertexId, _: &Graph) -> TriangleState {
        TriangleState::default()
    }
    fn gather_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn scatter_dir(&self) -> EdgeDir {
        EdgeDir::All
    }
    fn gather(&self, _: &Graph, _: VertexId, state: &TriangleState, nbr: Nbr<'_, TriangleState, u64>) -> (Vec<VertexId>, u64) {
        if state.collected {
            (Vec::new(), *nbr.data)
        } else {
            (vec![nbr.id], 0)
        }
    }
    fn gather_sum(&self, a: (Vec<VertexId>, u64), b: (Vec<VertexId>, u64)) -> (Vec<VertexId>, u64) {
        (merge(a.0, b.0), a.1 + b.1)
    }
    fn apply(&self, _: &Graph, _: VertexId, state: &mut TriangleState, acc: Option<(Vec<VertexId>, u64)>) -> bool {
        let (list, sum) = acc.unwrap_or_default();
        if state.collected {
            // every triangle reaches v along two of its edges
            state.triangles = sum / 2;
            false
        } else {
            state.neighbors = list;
            state.collected = true;
            true
        }
    }
    fn scatter(
        &self,
        _: &Graph,
        _: VertexId,
        state: &TriangleState,
        first_round: &bool,
        nbr: Nbr<'_, TriangleState, u64>,
        ctx: &mut ScatterCtx<'_, (Vec<VertexId>, u64), u64>,
    ) {
        if *first_round {
            ctx.set_edge_data(common(&state.neighbors, &nbr.state.neighbors));
            ctx.signal(nbr.id);
        }
    }
}

/// Adjacency lists of boundary vertices, as received.
#[derive(Default)]
struct RemoteAdjacency(BTreeMap<VertexId, Vec<VertexId>>);

/// Each vertex with cut edges ships `(u, N(u))` once per neighboring block;
/// everything else is counted inside the block.
struct BlockTriangles;

impl BlockTriangles {
    fn count(&self, block: &mut BlockView<'_, u64, RemoteAdjacency>) -> Result<()> {
        let graph = block.graph();
        for v in block.internal().to_vec() {
            let own = graph.neighbors(v);
            let mut hits = 0;
            for &u in own {
                hits += if block.is_internal(u) {
                    common(own, graph.neighbors(u))
                } else {
                    let theirs = block.data().0.get(&u).ok_or_else(|| {
                        Error::contract(format!("adjacency of boundary vertex {u} never arrived"))
                    })?;
                    common(own, theirs)
                };
            }
            block.set(v, hits / 2)?;
        }
        Ok(())
    }
}

impl BlockProgram for BlockTriangles {
    type State = u64;
    type Message = (VertexId, Vec<VertexId>);
    type BlockData = RemoteAdjacency;

    fn init(&self, _: VertexId, _: &Graph) -> u64 {
        0
    }

    fn compute(
        &self,
        block: &mut BlockView<'_, u64, RemoteAdjacency>,
        messages: &[(VertexId, Vec<(VertexId, Vec<VertexId>)>)],
        ctx: &mut BlockCtx<'_, (VertexId, Vec<VertexId>)>,
    ) -> Result<()> {
        if ctx.superstep() == 0 {
            let graph = block.graph();
            for &u in block.internal() {
                // one representative recipient per neighboring block
                let mut per_block: BTreeMap<usize, VertexId> = BTreeMap::new();
                for &w in graph.neighbors(u) {
                    if !block.is_internal(w) {
                        per_block.entry(block.owner_of(w)).or_insert(w);
                    }
                }
                for (_, w) in per_block {
                    ctx.send_to_vertex(w, (u, graph.neighbors(u).to_vec()));
                }
            }
            if block.boundary().is_empty() {
                self.count(block)?;
            }
        } else {
            for (_, inbox) in messages {
                for (u, list) in inbox {
                    block.data_mut().0.insert(*u, list.clone());
                }
            }
            self.count(block)?;
        }
        ctx.vote_to_halt();
        Ok(())
    }
}

fn pact_triangles(graph: &Graph, parallelism: usize) -> Result<(Vec<u64>, RunMetrics)> {
    use FieldType::{Int, List};
    let mut plan = Plan::new();
    let edges = plan.source("edges", vec![Int, Int])?;
    let adjacency = plan.source("adjacency", vec![Int, List])?;
    // (u, v) ⋈ N(u) -> (v, u, N(u))
    let with_source = plan.join(edges, adjacency, &[0], &[0], vec![Int, Int, List], |e, a| {
        vec![vec![e[1].clone(), e[0].clone(), a[1].clone()]]
    })?;
    // ... ⋈ N(v) -> (v, |N(u) ∩ N(v)|)
    let shared = plan.join(with_source, adjacency, &[0], &[0], vec![Int, Int], |t, a| {
        let n = common_values(t[2].as_list().unwrap_or(&[]), a[1].as_list().unwrap_or(&[]));
        vec![vec![t[0].clone(), Value::Int(n as i64)]]
    })?;
    let sums = plan.group(shared, &[0], Aggregate::Sum(1))?;
    let halved = plan.map(sums, vec![Int, Int], |t| {
        vec![vec![t[0].clone(), Value::Int(t[1].as_int().unwrap_or(0) / 2)]]
    })?;
    plan.sink(halved, "triangles")?;

    let adjacency = graph
        .vertices()
        .filter(|&v| graph.degree(v) > 0)
        .map(|v| {
            let list = graph.neighbors(v).iter().map(|&w| w as i64).collect();
            vec![Value::Int(v as i64), Value::List(list)]
        })
        .collect();
    let sources = [
        ("edges".to_string(), edge_dataset(graph)),
        ("adjacency".to_string(), Dataset::new(vec![Int, List], adjacency)?),
    ]
    .into_iter()
    .collect();
    let out = execute_dag(&plan, &sources, parallelism)?;
    let triangles = per_vertex(graph.num_vertices(), &out.outputs["triangles"], 0, |x: &Value| {
        x.as_int().unwrap_or(0) as u64
    });
    Ok((triangles, out.metrics))
}

fn common_values(a: &[i64], b: &[i64]) -> u64 {
    a.iter().filter(|x| b.binary_search(x).is_ok()).count() as u64
}

/// What the sampler estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxTarget {
    /// C(G): vertices drawn uniformly among those of degree ≥ 2.
    AverageLocal,
    /// Global coefficient: vertices drawn with weight deg(v)(deg(v) - 1).
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxClustering {
    pub target: ApproxTarget,
    pub estimate: f64,
    pub samples: u64,
    pub hits: u64,
}

/// Wedge sampling. The sample vertices are drawn up front from `seed`; each
/// sampled vertex then picks two distinct neighbors (u, w) with its own
/// generator and asks u whether w is a neighbor. Answers come back one
/// superstep later by intersecting u's adjacency with its incoming queries.
///
/// The GAS realization uses the message API, since a query is addressed to
/// one vertex rather than gathered over edges.
pub fn clustering_approx(
    graph: &Graph,
    engine: Engine,
    assignment: &PartitionAssignment,
    target: ApproxTarget,
    samples: u64,
    options: &RunOptions,
) -> Result<(ApproxClustering, RunMetrics)> {
    Algorithm::ClusteringApprox.check(engine)?;
    options.check_engine(engine)?;
    require_undirected(graph, "clustering")?;
    if samples == 0 {
        return Err(Error::argument("sample count must be at least 1"));
    }
    let quota = draw_sample_vertices(graph, target, samples, options.seed)?;
    let program = Wedges { quota, seed: options.seed };
    let (hits, metrics) = match engine {
        Engine::Pregel => {
            let out = run_pregel(graph, assignment, &program, &options.pregel())?;
            (out.states.iter().sum::<u64>(), out.metrics)
        }
        Engine::GasMessage => {
            let mut opts = options.gas_message();
            opts.engine = MessageEngine::Sync;
            let out = run_gas_message(graph, assignment, &program, &opts)?;
            (out.states.iter().sum::<u64>(), out.metrics)
        }
        _ => unreachable!("rejected by check"),
    };
    Ok((
        ApproxClustering {
            target,
            estimate: hits as f64 / samples as f64,
            samples,
            hits,
        },
        metrics,
    ))
}

/// How many wedges each vertex samples.
fn draw_sample_vertices(graph: &Graph, target: ApproxTarget, samples: u64, seed: u64) -> Result<Vec<u32>> {
    let eligible: Vec<VertexId> = graph.vertices().filter(|&v| graph.degree(v) >= 2).collect();
    if eligible.is_empty() {
        return Err(Error::argument("sampling needs at least one vertex of degree 2 or more"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quota = vec![0u32; graph.num_vertices()];
    match target {
        ApproxTarget::AverageLocal => {
            for _ in 0..samples {
                quota[eligible[rng.random_range(0..eligible.len())]] += 1;
            }
        }
        ApproxTarget::Global => {
            let weights = eligible.iter().map(|&v| {
                let d = graph.degree(v) as u64;
                d * (d - 1)
            });
            let dist = WeightedIndex::new(weights).map_err(|e| Error::argument(e.to_string()))?;
            for _ in 0..samples {
                quota[eligible[dist.sample(&mut rng)]] += 1;
            }
        }
    }
    Ok(quota)
}

struct Wedges {
    quota: Vec<u32>,
    seed: u64,
}

const WEDGE_SALT: u64 = 0x5745_4447_4553;

impl Wedges {
    /// `(u, w)` pairs of distinct neighbors of v.
    fn draw(&self, graph: &Graph, v: VertexId) -> Vec<(VertexId, VertexId)> {
        let k = self.quota[v];
        if k == 0 {
            return Vec::new();
        }
        let nbrs = graph.neighbors(v);
        let d = nbrs.len();
        let mut rng = vertex_rng(self.seed ^ WEDGE_SALT, v);
        (0..k)
            .map(|_| {
                let i = rng.random_range(0..d);
                let mut j = rng.random_range(0..d - 1);
                if j >= i {
                    j += 1;
                }
                (nbrs[i], nbrs[j])
            })
            .collect()
    }
}

fn answer(graph: &Graph, v: VertexId, queries: &[VertexId]) -> u64 {
    let own = graph.neighbors(v);
    queries.iter().filter(|w| own.binary_search(w).is_ok()).count() as u64
}

impl VertexProgram for Wedges {
    /// Queries answered positively at this vertex.
    type State = u64;
    type Message = VertexId;

    fn name(&self) -> &str {
        "clustering-approx"
    }

    fn init(&self, _: VertexId, _: &Graph) -> u64 {
        0
    }

    fn compute(&self, vertex: &mut Vertex<'_, u64>, messages: &[VertexId], ctx: &mut Context<'_, VertexId>) {
        let v = vertex.id();
        if ctx.superstep() == 0 {
            for (u, w) in self.draw(ctx.graph(), v) {
                ctx.send(u, w);
            }
        } else {
            let hits = answer(ctx.graph(), v, messages);
            vertex.set_value(*vertex.value() + hits);
        }
        ctx.vote_to_halt();
    }
}

impl MessageProgram for Wedges {
    type State = u64;
    type Message = Vec<VertexId>;
    type Scratch = Vec<(VertexId, VertexId)>;

    fn init(&self, _: VertexId, _: &Graph) -> u64 {
        0
    }
    fn combine(&self, mut a: Vec<VertexId>, b: Vec<VertexId>) -> Vec<VertexId> {
        a.extend(b);
        a
    }
    fn apply(
        &self,
        graph: &Graph,
        v: VertexId,
        state: &mut u64,
        message: Option<Vec<VertexId>>,
        first: bool,
    ) -> Vec<(VertexId, VertexId)> {
        if let Some(queries) = message {
            *state += answer(graph, v, &queries);
        }
        if first {
            self.draw(graph, v)
        } else {
            Vec::new()
        }
    }
    fn scatter(
        &self,
        _: &Graph,
        _: VertexId,
        _: &u64,
        queries: &Vec<(VertexId, VertexId)>,
        ctx: &mut MessageCtx<'_, Vec<VertexId>>,
    ) {
        for &(u, w) in queries {
            ctx.send(u, vec![w]);
        }
    }
}
