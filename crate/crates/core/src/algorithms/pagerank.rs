use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::{per_vertex, vertex_dataset, Algorithm, Engine, RunOptions};
use crate::cluster::{AggOp, AggValue, Aggregators, Combiner, ExactSum, RunMetrics, SumCombiner};
use crate::error::{Error, Result};
use crate::gas::{run_gas_async, run_gas_sync, EdgeDir, GasProgram, Nbr, ScatterCtx};
use crate::graph::{Graph, PartitionAssignment, VertexId};
use crate::graphcentric::{run_graph_centric, BlockCtx, BlockProgram, BlockView};
use crate::pact::{execute_dag, Aggregate, Convergence, Dataset, FieldType, Plan, Value, NEXT, PARTIAL};
use crate::pregel::{run_pregel, Context, MasterContext, Vertex, VertexProgram};

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_ITERATIONS: u64 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PageRankMode {
    /// Exactly this many applications of the update rule.
    Fixed(u64),
    /// Until no score moves by more than this.
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankParams {
    /// Random-jump weight, in (0, 1).
    pub alpha: f64,
    pub mode: PageRankMode,
    /// Sum combiner on the Pregel engine.
    pub combiner: bool,
    /// GAS engines: scatter posts exact deltas and caches gathers.
    pub delta_caching: bool,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            alpha: DEFAULT_ALPHA,
            mode: PageRankMode::Fixed(DEFAULT_ITERATIONS),
            combiner: true,
            delta_caching: false,
        }
    }
}

impl PageRankParams {
    pub fn fixed(iterations: u64) -> Self {
        PageRankParams {
            mode: PageRankMode::Fixed(iterations),
            ..Default::default()
        }
    }

    pub fn tolerance(epsilon: f64) -> Self {
        PageRankParams {
            mode: PageRankMode::Tolerance(epsilon),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::argument(format!("alpha must lie strictly between 0 and 1, got {}", self.alpha)));
        }
        if let PageRankMode::Tolerance(eps) = self.mode {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::argument(format!("tolerance must be positive, got {eps}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    /// Update rounds; for the async engine, applies divided by |V|.
    pub iterations: u64,
    /// Round-based engines: largest score change in the last round.
    /// GAS engines: largest residual |F(P)(v) - P(v)| of the final scores.
    pub final_max_delta: f64,
    pub converged: bool,
    /// Largest gap between a cached and a re-gathered sum seen by the
    /// delta-caching audit; zero when caching is off.
    pub max_cache_discrepancy: f64,
    pub metrics: RunMetrics,
}

/// PageRank with the rule P(v) = α + (1-α) Σ P(u)/outdeg(u) over in-edges,
/// from P = 1. Vertices without out-edges send nothing, so mass leaks,
/// exactly as the rule is written.
///
/// Contributions are summed in [`ExactSum`], which makes fixed-mode scores
/// bit-identical across engines, worker counts and combiner settings.
/// `gas-async` only supports tolerance mode.
pub fn pagerank(
    graph: &Graph,
    engine: Engine,
    assignment: &PartitionAssignment,
    params: &PageRankParams,
    options: &RunOptions,
) -> Result<PageRankResult> {
    Algorithm::PageRank.check(engine)?;
    options.check_engine(engine)?;
    params.validate()?;
    let n = graph.num_vertices();
    match engine {
        Engine::Pregel => {
            let program = PregelPr { params: *params };
            let out = run_pregel(graph, assignment, &program, &options.pregel())?;
            let iterations = out.metrics.supersteps.saturating_sub(1);
            Ok(PageRankResult {
                scores: out.states,
                iterations,
                final_max_delta: out.records.get(FINAL_MAX_DELTA).copied().unwrap_or(0.0),
                converged: !out.metrics.step_limit_reached,
                max_cache_discrepancy: 0.0,
                metrics: out.metrics,
            })
        }
        Engine::GasSync | Engine::GasAsync => {
            let threshold = match params.mode {
                PageRankMode::Fixed(_) if engine == Engine::GasAsync => {
                    return Err(Error::argument(
                        "gas-async PageRank has no rounds to count; use tolerance mode",
                    ))
                }
                PageRankMode::Fixed(_) => None,
                PageRankMode::Tolerance(eps) => Some(signal_threshold(params.alpha, eps, n)),
            };
            let program = GasPr {
                alpha: params.alpha,
                threshold,
                post_deltas: params.delta_caching,
            };
            let out = if engine == Engine::GasSync {
                let mut opts = options.gas_sync();
                if let PageRankMode::Fixed(i) = params.mode {
                    opts.max_iterations = i;
                }
                opts.delta_caching = params.delta_caching;
                opts.audit_cache = params.delta_caching;
                run_gas_sync(graph, assignment, &program, &opts)?
            } else {
                let mut opts = options.gas_async();
                opts.delta_caching = params.delta_caching;
                opts.audit_cache = params.delta_caching;
                run_gas_async(graph, assignment, &program, &opts)?
            };
            let scores: Vec<f64> = out.states.iter().map(|s| s.rank).collect();
            let mut metrics = out.metrics;
            let (iterations, converged) = match params.mode {
                PageRankMode::Fixed(i) => {
                    // stopping at the budget is the point of fixed mode
                    metrics.step_limit_reached = false;
                    (i, true)
                }
                PageRankMode::Tolerance(_) if engine == Engine::GasSync => (metrics.supersteps, !metrics.step_limit_reached),
                PageRankMode::Tolerance(_) => (metrics.compute_calls / n.max(1) as u64, !metrics.step_limit_reached),
            };
            Ok(PageRankResult {
                final_max_delta: residual(graph, &scores, params.alpha),
                scores,
                iterations,
                converged,
                max_cache_discrepancy: out.max_cache_discrepancy,
                metrics,
            })
        }
        Engine::GraphCentric => {
            let program = BlockPr { params: *params };
            let out = run_graph_centric(graph, assignment, &program, &options.graph_centric())?;
            Ok(PageRankResult {
                scores: out.states,
                iterations: out.metrics.supersteps.saturating_sub(1),
                final_max_delta: out.records.get(FINAL_MAX_DELTA).copied().unwrap_or(0.0),
                converged: !out.metrics.step_limit_reached,
                max_cache_discrepancy: 0.0,
                metrics: out.metrics,
            })
        }
        Engine::Pact => pact_pagerank(graph, assignment.num_blocks(), params, options.max_supersteps),
        Engine::GasMessage => unreachable!("rejected by check"),
    }
}

/// Fixed-point share of one out-edge; the same rounding on every engine.
fn contribution(rank: f64, out_degree: usize) -> ExactSum {
    ExactSum::from_f64(rank / out_degree as f64)
}

fn update(alpha: f64, sum: ExactSum) -> f64 {
    alpha + (1.0 - alpha) * sum.to_f64()
}

/// Per-vertex unsignaled drift allowed to the GAS engines. Summed over all
/// vertices the leftover residual stays below αε, which keeps the scores
/// within ε of the fixpoint.
fn signal_threshold(alpha: f64, eps: f64, n: usize) -> f64 {
    alpha * eps / ((1.0 - alpha) * n.max(1) as f64)
}

/// Largest |F(P)(v) - P(v)|, evaluated directly on the graph.
fn residual(graph: &Graph, scores: &[f64], alpha: f64) -> f64 {
    graph
        .vertices()
        .map(|v| {
            let sum: ExactSum = graph
                .in_neighbors(v)
                .iter()
                .map(|&u| contribution(scores[u], graph.out_degree(u)))
                .sum();
            (update(alpha, sum) - scores[v]).abs()
        })
        .fold(0.0, f64::max)
}

const MAX_DELTA: &str = "max_delta";
const FINAL_MAX_DELTA: &str = "final_max_delta";

/// Shared master logic: remember the last round's max change and stop
/// once it is within tolerance.
fn master_step(mode: PageRankMode, master: &mut MasterContext<'_>) {
    if master.superstep() == 0 {
        return;
    }
    let Some(delta) = master.aggregated(MAX_DELTA).and_then(AggValue::as_f64) else {
        return;
    };
    if delta.is_finite() {
        master.record(FINAL_MAX_DELTA, delta);
        if let PageRankMode::Tolerance(eps) = mode {
            if delta <= eps {
                master.halt_computation();
            }
        }
    }
}

struct PregelPr {
    params: PageRankParams,
}

impl VertexProgram for PregelPr {
    type State = f64;
    type Message = ExactSum;

    fn name(&self) -> &str {
        "pagerank"
    }

    fn init(&self, _: VertexId, _: &Graph) -> f64 {
        1.0
    }

    fn compute(&self, vertex: &mut Vertex<'_, f64>, messages: &[ExactSum], ctx: &mut Context<'_, ExactSum>) {
        let s = ctx.superstep();
        if s > 0 {
            let new = update(self.params.alpha, messages.iter().copied().sum());
            ctx.aggregate(MAX_DELTA, AggValue::Float((new - *vertex.value()).abs()));
            vertex.set_value(new);
        }
        if let PageRankMode::Fixed(i) = self.params.mode {
            if s >= i {
                ctx.vote_to_halt();
                return;
            }
        }
        let od = vertex.num_edges();
        if od > 0 {
            ctx.send_to_all_neighbors(contribution(*vertex.value(), od));
        }
    }

    fn combiner(&self) -> Option<&dyn Combiner<ExactSum>> {
        if self.params.combiner {
            Some(&SumCombiner)
        } else {
            None
        }
    }

    fn register_aggregators(&self, aggregators: &mut Aggregators) {
        aggregators.register(MAX_DELTA, AggOp::FloatMax);
    }

    fn master_compute(&self, master: &mut MasterContext<'_>) {
        master_step(self.params.mode, master);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PrState {
    rank: f64,
    /// Change not yet announced to out-neighbors (tolerance mode).
    drift: f64,
}

struct PrScratch {
    signal: bool,
    /// New minus old contribution per out-edge.
    diff: ExactSum,
}

/// Gather over in-edges, scatter over out-edges. With `threshold` unset a
/// vertex signals on any change, which reproduces the synchronous rule
/// exactly; otherwise it signals once its accumulated drift exceeds it.
struct GasPr {
    alpha: f64,
    threshold: Option<f64>,
    post_deltas: bool,
}

impl GasProgram for GasPr {
    type State = PrState;
    type Gather = ExactSum;
    type EdgeData = ();
    type Scratch = PrScratch;

    fn init(&self, _: VertexId, _: &Graph) -> PrState {
        PrState { rank: 1.0, drift: 0.0 }
    }
    fn gather_dir(&self) -> EdgeDir {
        EdgeDir::In
    }
    fn scatter_dir(&self) -> EdgeDir {
        EdgeDir::Out
    }
    fn gather(&self, graph: &Graph, _: VertexId, _: &PrState, nbr: Nbr<'_, PrState, ()>) -> ExactSum {
        contribution(nbr.state.rank, graph.out_degree(nbr.id))
    }
    fn gather_sum(&self, a: ExactSum, b: ExactSum) -> ExactSum {
        a + b
    }
    fn apply(&self, graph: &Graph, v: VertexId, state: &mut PrState, acc: Option<ExactSum>) -> PrScratch {
        let old = state.rank;
        let new = update(self.alpha, acc.unwrap_or_default());
        state.rank = new;
        let od = graph.out_degree(v);
        let diff = if od > 0 {
            contribution(new, od) - contribution(old, od)
        } else {
            ExactSum::ZERO
        };
        let signal = match self.threshold {
            None => new != old,
            Some(t) => {
                state.drift += (new - old).abs();
                let fire = state.drift > t;
                if fire {
                    state.drift = 0.0;
                }
                fire
            }
        };
        PrScratch { signal, diff }
    }
    fn scatter(
        &self,
        _: &Graph,
        _: VertexId,
        _: &PrState,
        scratch: &PrScratch,
        nbr: Nbr<'_, PrState, ()>,
        ctx: &mut ScatterCtx<'_, ExactSum, ()>,
    ) {
        // deltas go out even without a signal so caches never go stale
        if self.post_deltas && scratch.diff != ExactSum::ZERO {
            ctx.post_delta(nbr.id, scratch.diff);
        }
        if scratch.signal {
            ctx.signal(nbr.id);
        }
    }
    fn delta_correct(&self) -> bool {
        self.post_deltas
    }
    fn gather_distance(&self, cached: &ExactSum, fresh: &ExactSum) -> f64 {
        (*cached - *fresh).to_f64().abs()
    }
}

/// Block PageRank. Fixed mode is block-Jacobi and matches the vertex
/// engines bit for bit; tolerance mode sweeps each block Gauss-Seidel style,
/// using fresh internal scores and the last received remote sums.
struct BlockPr {
    params: PageRankParams,
}

impl BlockPr {
    fn send_contributions(&self, block: &BlockView<'_, f64, ()>, ctx: &mut BlockCtx<'_, ExactSum>) -> Result<()> {
        let graph = block.graph();
        let mut out: BTreeMap<VertexId, ExactSum> = BTreeMap::new();
        for &u in block.internal() {
            let od = graph.out_degree(u);
            let mut c = None;
            for &w in graph.out_neighbors(u) {
                if !block.is_internal(w) {
                    let c = *c.get_or_insert(contribution(*block.get(u)?, od));
                    *out.entry(w).or_default() += c;
                }
            }
        }
        for (w, sum) in out {
            ctx.send_to_vertex(w, sum);
        }
        Ok(())
    }
}

impl BlockProgram for BlockPr {
    type State = f64;
    type Message = ExactSum;
    type BlockData = ();

    fn init(&self, _: VertexId, _: &Graph) -> f64 {
        1.0
    }

    fn compute(
        &self,
        block: &mut BlockView<'_, f64, ()>,
        messages: &[(VertexId, Vec<ExactSum>)],
        ctx: &mut BlockCtx<'_, ExactSum>,
    ) -> Result<()> {
        let s = ctx.superstep();
        if s > 0 {
            let remote: BTreeMap<VertexId, ExactSum> =
                messages.iter().map(|(v, m)| (*v, m.iter().copied().sum())).collect();
            let graph = block.graph();
            let internal = block.internal().to_vec();
            let jacobi = matches!(self.params.mode, PageRankMode::Fixed(_));
            let old: Vec<f64> = internal.iter().map(|&v| *block.get(v).unwrap()).collect();
            let mut new_values = Vec::with_capacity(internal.len());
            let mut max_delta: f64 = 0.0;
            for (i, &v) in internal.iter().enumerate() {
                let mut sum = remote.get(&v).copied().unwrap_or_default();
                for &u in graph.in_neighbors(v) {
                    if block.is_internal(u) {
                        let rank = if jacobi {
                            old[internal.binary_search(&u).expect("internal")]
                        } else {
                            *block.get(u)?
                        };
                        sum += contribution(rank, graph.out_degree(u));
                    }
                }
                let new = update(self.params.alpha, sum);
                max_delta = max_delta.max((new - old[i]).abs());
                if jacobi {
                    new_values.push(new);
                } else {
                    block.set(v, new)?;
                }
            }
            for (&v, x) in internal.iter().zip(new_values) {
                block.set(v, x)?;
            }
            ctx.aggregate(MAX_DELTA, AggValue::Float(max_delta));
        }
        if let PageRankMode::Fixed(i) = self.params.mode {
            if s >= i {
                ctx.vote_to_halt();
                return Ok(());
            }
        }
        self.send_contributions(block, ctx)
    }

    fn register_aggregators(&self, aggregators: &mut Aggregators) {
        aggregators.register(MAX_DELTA, AggOp::FloatMax);
    }

    fn master_compute(&self, master: &mut MasterContext<'_>) {
        master_step(self.params.mode, master);
    }
}

fn pact_pagerank(graph: &Graph, parallelism: usize, params: &PageRankParams, max_iterations: u64) -> Result<PageRankResult> {
    use FieldType::{Float, Int, List};
    let n = graph.num_vertices();
    let alpha = params.alpha;
    let (budget, convergence, last_delta) = match params.mode {
        PageRankMode::Fixed(0) => {
            return Ok(PageRankResult {
                scores: vec![1.0; n],
                iterations: 0,
                final_max_delta: 0.0,
                converged: true,
                max_cache_discrepancy: 0.0,
                metrics: RunMetrics::default(),
            })
        }
        PageRankMode::Fixed(i) => (i, Convergence::Fixed, None),
        PageRankMode::Tolerance(eps) => {
            let last = Arc::new(Mutex::new(f64::NAN));
            let seen = last.clone();
            let criterion = move |prev: &Dataset, next: &Dataset| {
                // both sorted by vertex with one tuple each
                let delta = prev
                    .tuples()
                    .iter()
                    .zip(next.tuples())
                    .map(|(a, b)| (a[1].as_float().unwrap_or(0.0) - b[1].as_float().unwrap_or(0.0)).abs())
                    .fold(0.0, f64::max);
                *seen.lock().unwrap_or_else(|e| e.into_inner()) = delta;
                delta <= eps
            };
            (max_iterations, Convergence::Custom(Arc::new(criterion)), Some(last))
        }
    };

    let mut body = Plan::new();
    let ranks = body.source(PARTIAL, vec![Int, Float])?;
    let adjacency = body.source("adjacency", vec![Int, List])?;
    let shares = body.join(ranks, adjacency, &[0], &[0], vec![Int, Float], |r, a| {
        let targets = a[1].as_list().unwrap_or(&[]);
        let share = r[1].as_float().unwrap_or(0.0) / targets.len() as f64;
        targets.iter().map(|&w| vec![Value::Int(w), Value::Float(share)]).collect()
    })?;
    let zeros = body.map(ranks, vec![Int, Float], |r| vec![vec![r[0].clone(), Value::Float(0.0)]])?;
    let all = body.union(shares, zeros)?;
    let sums = body.group(all, &[0], Aggregate::Sum(1))?;
    let next = body.map(sums, vec![Int, Float], move |t| {
        let s = t[1].as_float().unwrap_or(0.0);
        vec![vec![t[0].clone(), Value::Float(alpha + (1.0 - alpha) * s)]]
    })?;
    body.sink(next, NEXT)?;

    let mut plan = Plan::new();
    let v = plan.source("vertices", vec![Int])?;
    let adj = plan.source("adjacency", vec![Int, List])?;
    let init = plan.map(v, vec![Int, Float], |t| vec![vec![t[0].clone(), Value::Float(1.0)]])?;
    let out = plan.iterate(init, &[("adjacency", adj)], body, budget, convergence)?;
    plan.sink(out, "ranks")?;

    let adjacency = graph
        .vertices()
        .filter(|&u| graph.out_degree(u) > 0)
        .map(|u| {
            let list = graph.out_neighbors(u).iter().map(|&w| w as i64).collect();
            vec![Value::Int(u as i64), Value::List(list)]
        })
        .collect();
    let sources = [
        ("vertices".to_string(), vertex_dataset(graph)),
        ("adjacency".to_string(), Dataset::new(vec![Int, List], adjacency)?),
    ]
    .into_iter()
    .collect();
    let out = execute_dag(&plan, &sources, parallelism)?;
    let scores = per_vertex(n, &out.outputs["ranks"], 1.0, |x: &Value| x.as_float().unwrap_or(0.0));
    let report = out.iterations[0];
    let final_max_delta = match last_delta {
        Some(d) => *d.lock().unwrap_or_else(|e| e.into_inner()),
        None => f64::NAN,
    };
    Ok(PageRankResult {
        scores,
        iterations: report.iterations,
        final_max_delta,
        converged: report.converged,
        max_cache_discrepancy: 0.0,
        metrics: out.metrics,
    })
}
