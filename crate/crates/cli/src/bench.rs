//! Benchmark matrices: validation up front, then one run per cell.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use gpm_core::algorithms::{
    checksum_f64, checksum_labels, clustering_approx, clustering_exact, community_detection_lp, connected_components,
    pagerank, ApproxTarget, PageRankMode, PageRankParams, DEFAULT_ALPHA, DEFAULT_ITERATIONS, DEFAULT_TOLERANCE,
};
use gpm_core::graph::{dorogovtsev_mendes, load_edge_list, partition_hash};
use gpm_core::{Algorithm, CheckpointPolicy, Engine, Error, ExecMode, Graph, Result, RunOptions, VertexId};
use log::info;

use crate::record::{OutputFormat, Record};

#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    File(PathBuf),
    /// Dorogovtsev-Mendes graph with this many vertices.
    DmVertices(usize),
    /// Weak scaling: a fresh DM graph per worker count with about this
    /// many edges per worker.
    DmEdgesPerWorker(usize),
}

/// A whole benchmark matrix. Workers are logical partitions of one
/// process, not machines.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub input: InputSpec,
    pub algorithms: Vec<Algorithm>,
    pub engines: Vec<Engine>,
    pub workers: Vec<usize>,
    pub alpha: f64,
    /// PageRank: tolerance mode when set. gas-async always uses it.
    pub tolerance: Option<f64>,
    pub iterations: u64,
    pub max_rounds: u64,
    pub samples: u64,
    pub target: ApproxTarget,
    pub seed: u64,
    pub repetitions: u32,
    pub format: OutputFormat,
    pub checkpoint_every: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
    pub kill_at_superstep: Option<u64>,
    pub parallel: bool,
    pub timing: bool,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            input: InputSpec::DmVertices(1000),
            algorithms: vec![Algorithm::Cc],
            engines: vec![Engine::Pregel],
            workers: vec![1],
            alpha: DEFAULT_ALPHA,
            tolerance: None,
            iterations: DEFAULT_ITERATIONS,
            max_rounds: 100,
            samples: 10_000,
            target: ApproxTarget::AverageLocal,
            seed: 0,
            repetitions: 1,
            format: OutputFormat::Csv,
            checkpoint_every: None,
            checkpoint_dir: None,
            kill_at_superstep: None,
            parallel: false,
            timing: false,
        }
    }
}

impl BenchmarkSpec {
    /// Rejects anything that would fail part-way through the matrix.
    pub fn validate(&self) -> Result<()> {
        let arg = |m: String| Err(Error::Argument(m));
        if self.algorithms.is_empty() || self.engines.is_empty() {
            return arg("need at least one algorithm and one engine".into());
        }
        if self.workers.is_empty() || self.workers.contains(&0) {
            return arg("workers must be a non-empty list of positive counts".into());
        }
        if self.repetitions == 0 {
            return arg("repetitions must be at least 1".into());
        }
        for &a in &self.algorithms {
            for &e in &self.engines {
                if !a.supports(e) {
                    return arg(format!(
                        "{a} does not run on {e}; valid pairs are {}",
                        Algorithm::valid_pairs()
                    ));
                }
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return arg(format!("alpha must lie strictly between 0 and 1, got {}", self.alpha));
        }
        if let Some(eps) = self.tolerance {
            if !(eps > 0.0 && eps.is_finite()) {
                return arg(format!("tolerance must be positive, got {eps}"));
            }
        }
        if self.samples == 0 {
            return arg("samples must be at least 1".into());
        }
        let fault_options = self.checkpoint_every.is_some() || self.kill_at_superstep.is_some();
        if fault_options && self.engines.iter().any(|&e| e != Engine::Pregel) {
            return arg("--checkpoint-every and --kill-at-superstep need --engine pregel".into());
        }
        if self.checkpoint_every == Some(0) {
            return arg("--checkpoint-every must be positive".into());
        }
        match &self.input {
            InputSpec::DmVertices(n) if *n < 3 => arg("a DM graph needs at least 3 vertices".into()),
            InputSpec::DmEdgesPerWorker(0) => arg("--edges-per-worker must be positive".into()),
            InputSpec::File(p) if !p.is_file() => Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{}: no such file", p.display()),
            ))),
            _ => Ok(()),
        }
    }

    fn pagerank_params(&self, engine: Engine) -> PageRankParams {
        let mode = match self.tolerance {
            Some(eps) => PageRankMode::Tolerance(eps),
            None if engine == Engine::GasAsync => PageRankMode::Tolerance(DEFAULT_TOLERANCE),
            None => PageRankMode::Fixed(self.iterations),
        };
        PageRankParams {
            alpha: self.alpha,
            mode,
            ..Default::default()
        }
    }
}

/// Per-vertex output of one run, kept for `--results`.
#[derive(Debug, Clone, PartialEq)]
pub enum VertexValues {
    Labels(Vec<VertexId>),
    Scores(Vec<f64>),
    /// Local coefficients; vertices below degree two have none.
    Coefficients(Vec<Option<f64>>),
    /// Sampling produces no per-vertex output.
    None,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub record: Record,
    pub values: VertexValues,
    pub scalars: Vec<(String, String)>,
}

pub fn checksum_coefficients(local: &[Option<f64>]) -> u64 {
    let v: Vec<f64> = local.iter().map(|x| x.unwrap_or(-1.0)).collect();
    checksum_f64(&v)
}

pub fn hex(x: u64) -> String {
    format!("{x:016x}")
}

/// The graph a run reads: PageRank follows edge direction, the rest
/// treat edges as undirected.
pub fn load_graph(input: &InputSpec, directed: bool, workers: usize, seed: u64) -> Result<Graph> {
    match input {
        InputSpec::File(path) => {
            let file = File::open(path)?;
            load_edge_list(BufReader::new(file), directed)
        }
        InputSpec::DmVertices(n) => as_directed(dorogovtsev_mendes(*n, seed)?, directed),
        InputSpec::DmEdgesPerWorker(e) => {
            // m = 2n - 3 for DM graphs
            let n = (e * workers + 3).div_ceil(2).max(3);
            as_directed(dorogovtsev_mendes(n, seed)?, directed)
        }
    }
}

/// PageRank on a generated graph walks every edge both ways.
fn as_directed(g: Graph, directed: bool) -> Result<Graph> {
    if !directed {
        return Ok(g);
    }
    let mut arcs: Vec<(VertexId, VertexId)> = g.edges().collect();
    arcs.extend(g.edges().map(|(u, v)| (v, u)).collect::<Vec<_>>());
    Ok(Graph::from_edges(g.num_vertices(), true, &arcs))
}

/// Runs one cell of the matrix.
pub fn run_cell(
    spec: &BenchmarkSpec,
    graph: &Graph,
    algorithm: Algorithm,
    engine: Engine,
    workers: usize,
    repetition: u32,
) -> Result<CellOutput> {
    let assignment = partition_hash(graph, workers, spec.seed)?;
    let _scratch;
    let checkpoint = match (spec.checkpoint_every, &spec.checkpoint_dir) {
        (None, _) => None,
        (Some(every), Some(dir)) => Some(CheckpointPolicy::new(dir.join(format!("{algorithm}-{workers}-{repetition}")), every)),
        (Some(every), None) => {
            let dir = tempfile::tempdir()?;
            let policy = CheckpointPolicy::new(dir.path(), every);
            _scratch = dir;
            Some(policy)
        }
    };
    let options = RunOptions {
        mode: if spec.parallel { ExecMode::Parallel } else { ExecMode::Sequential },
        seed: spec.seed,
        checkpoint,
        kill_at_superstep: spec.kill_at_superstep,
        ..Default::default()
    };
    let mut record = Record {
        algorithm: algorithm.to_string(),
        engine: engine.to_string(),
        workers,
        repetition,
        vertices: graph.num_vertices(),
        edges: graph.num_edges(),
        supersteps: 0,
        messages_sent: 0,
        messages_delivered: 0,
        messages_local: 0,
        messages_remote: 0,
        payload_bytes: 0,
        vertex_updates: 0,
        compute_calls: 0,
        active_vertices_per_superstep: Vec::new(),
        step_limit_reached: false,
        recoveries: 0,
        wall_time_ms: None,
        iterations: 0,
        converged: true,
        summary: None,
        checksum: String::new(),
        seed: spec.seed,
    };
    let mut scalars = Vec::new();
    let values = match algorithm {
        Algorithm::Cc => {
            let (labels, m) = connected_components(graph, engine, &assignment, &options)?;
            let mut roots: Vec<_> = labels.clone();
            roots.sort_unstable();
            roots.dedup();
            record.set_metrics(&m, spec.timing);
            record.iterations = m.supersteps;
            record.summary = Some(roots.len() as f64);
            record.checksum = hex(checksum_labels(&labels));
            scalars.push(("components".into(), roots.len().to_string()));
            VertexValues::Labels(labels)
        }
        Algorithm::Community => {
            let r = community_detection_lp(graph, engine, &assignment, spec.max_rounds, &options)?;
            let mut distinct = r.labels.clone();
            distinct.sort_unstable();
            distinct.dedup();
            record.set_metrics(&r.metrics, spec.timing);
            record.iterations = r.rounds;
            record.converged = r.converged;
            record.summary = Some(distinct.len() as f64);
            record.checksum = hex(checksum_labels(&r.labels));
            scalars.push(("communities".into(), distinct.len().to_string()));
            scalars.push(("converged".into(), r.converged.to_string()));
            scalars.push(("oscillating".into(), r.oscillating.to_string()));
            VertexValues::Labels(r.labels)
        }
        Algorithm::PageRank => {
            let params = spec.pagerank_params(engine);
            let r = pagerank(graph, engine, &assignment, &params, &options)?;
            record.set_metrics(&r.metrics, spec.timing);
            record.iterations = r.iterations;
            record.converged = r.converged;
            record.summary = Some(r.final_max_delta).filter(|x| x.is_finite());
            record.checksum = hex(checksum_f64(&r.scores));
            scalars.push(("alpha".into(), params.alpha.to_string()));
            scalars.push(("iterations".into(), r.iterations.to_string()));
            scalars.push(("final_max_delta".into(), r.final_max_delta.to_string()));
            VertexValues::Scores(r.scores)
        }
        Algorithm::ClusteringExact => {
            let (r, m) = clustering_exact(graph, engine, &assignment, &options)?;
            record.set_metrics(&m, spec.timing);
            record.iterations = m.supersteps;
            record.summary = Some(r.average_local);
            record.checksum = hex(checksum_coefficients(&r.local));
            scalars.push(("average_local".into(), r.average_local.to_string()));
            scalars.push(("global".into(), r.global.to_string()));
            scalars.push(("triangles".into(), r.total_triangles.to_string()));
            scalars.push(("triplets".into(), r.triplets.to_string()));
            VertexValues::Coefficients(r.local)
        }
        Algorithm::ClusteringApprox => {
            let (r, m) = clustering_approx(graph, engine, &assignment, spec.target, spec.samples, &options)?;
            record.set_metrics(&m, spec.timing);
            record.iterations = m.supersteps;
            record.summary = Some(r.estimate);
            record.checksum = hex(checksum_f64(&[r.estimate]));
            scalars.push(("estimate".into(), r.estimate.to_string()));
            scalars.push(("samples".into(), r.samples.to_string()));
            scalars.push(("hits".into(), r.hits.to_string()));
            VertexValues::None
        }
    };
    Ok(CellOutput { record, values, scalars })
}

/// Validates the matrix, then runs every (algorithm, engine, workers,
/// repetition) cell in order. Returns the records and the first cell's
/// full output.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<(Vec<Record>, Option<CellOutput>)> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut first = None;
    let per_worker_graph = matches!(spec.input, InputSpec::DmEdgesPerWorker(_));
    for &algorithm in &spec.algorithms {
        let directed = algorithm.directed_input();
        let shared = if per_worker_graph {
            None
        } else {
            Some(load_graph(&spec.input, directed, 1, spec.seed)?)
        };
        for &workers in &spec.workers {
            let scaled;
            let graph = match &shared {
                Some(g) => g,
                None => {
                    scaled = load_graph(&spec.input, directed, workers, spec.seed)?;
                    &scaled
                }
            };
            for &engine in &spec.engines {
                for repetition in 0..spec.repetitions {
                    info!("{algorithm} on {engine}, {workers} workers, repetition {repetition}");
                    let cell = run_cell(spec, graph, algorithm, engine, workers, repetition)?;
                    records.push(cell.record.clone());
                    if first.is_none() {
                        first = Some(cell);
                    }
                }
            }
        }
    }
    Ok((records, first))
}
