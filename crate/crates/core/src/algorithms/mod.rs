//! The four analyses expressed in every programming model that can host
//! them, with brute-force oracles to check them against.

mod cc;
mod clustering;
mod community;
mod export;
pub mod oracle;
mod pagerank;

use std::fmt;
use std::str::FromStr;

pub use cc::connected_components;
pub use clustering::{
    clustering_approx, clustering_exact, clustering_exact_with_limit, ApproxClustering, ApproxTarget, ClusteringResult,
    DEFAULT_RESOURCE_LIMIT,
};
pub use community::{community_detection_lp, is_lp_fixpoint, CommunityResult};
pub use export::{checksum_f64, checksum_labels, write_labels, write_scalars, write_vertex_values};
pub use pagerank::{
    pagerank, PageRankMode, PageRankParams, PageRankResult, DEFAULT_ALPHA, DEFAULT_ITERATIONS, DEFAULT_TOLERANCE,
};

use crate::cluster::{CheckpointPolicy, ExecMode};
use crate::error::{Error, Result};
use crate::gas::{AsyncOptions, MessageOptions, QueueOrder, SyncOptions};
use crate::graph::{Graph, VertexId};
use crate::graphcentric::GraphCentricConfig;
use crate::pact::{Dataset, FieldType, Value};
use crate::pregel::{PregelConfig, DEFAULT_MAX_SUPERSTEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Engine {
    Pregel,
    GasSync,
    GasAsync,
    GasMessage,
    GraphCentric,
    Pact,
}

impl Engine {
    pub const ALL: [Engine; 6] = [
        Engine::Pregel,
        Engine::GasSync,
        Engine::GasAsync,
        Engine::GasMessage,
        Engine::GraphCentric,
        Engine::Pact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Pregel => "pregel",
            Engine::GasSync => "gas-sync",
            Engine::GasAsync => "gas-async",
            Engine::GasMessage => "gas-message",
            Engine::GraphCentric => "graph-centric",
            Engine::Pact => "pact",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('_', "-");
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown engine {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Cc,
    Community,
    PageRank,
    ClusteringExact,
    ClusteringApprox,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Cc,
        Algorithm::Community,
        Algorithm::PageRank,
        Algorithm::ClusteringExact,
        Algorithm::ClusteringApprox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cc => "cc",
            Algorithm::Community => "community",
            Algorithm::PageRank => "pagerank",
            Algorithm::ClusteringExact => "clustering-exact",
            Algorithm::ClusteringApprox => "clustering-approx",
        }
    }

    pub fn engines(self) -> &'static [Engine] {
        use Engine::*;
        match self {
            Algorithm::Cc => &Engine::ALL,
            Algorithm::Community | Algorithm::PageRank => &[Pregel, GasSync, GasAsync, GraphCentric, Pact],
            Algorithm::ClusteringExact => &[Pregel, GasSync, GraphCentric, Pact],
            // the GAS variant runs on the synchronous message API
            Algorithm::ClusteringApprox => &[Pregel, GasMessage],
        }
    }

    pub fn supports(self, engine: Engine) -> bool {
        self.engines().contains(&engine)
    }

    /// PageRank reads edge direction; everything else wants undirected input.
    pub fn directed_input(self) -> bool {
        self == Algorithm::PageRank
    }

    /// Every supported pair, formatted for error messages.
    pub fn valid_pairs() -> String {
        Algorithm::ALL
            .iter()
            .map(|a| {
                let engines: Vec<&str> = a.engines().iter().map(|e| e.name()).collect();
                format!("{}: {}", a.name(), engines.join(", "))
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    pub(crate) fn check(self, engine: Engine) -> Result<()> {
        if self.supports(engine) {
            Ok(())
        } else {
            Err(Error::argument(format!(
                "{} does not run on {}; valid pairs are {}",
                self.name(),
                engine.name(),
                Algorithm::valid_pairs()
            )))
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown algorithm {s:?}")))
    }
}

/// Engine settings shared by all algorithms.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: ExecMode,
    /// Drives the async queue order and every algorithm-level random choice.
    pub seed: u64,
    /// Superstep or iteration budget.
    pub max_supersteps: u64,
    /// Pregel only.
    pub checkpoint: Option<CheckpointPolicy>,
    /// Pregel only.
    pub kill_at_superstep: Option<u64>,
    /// Async GAS worker threads in parallel mode; 0 picks a default.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: ExecMode::Sequential,
            seed: 0,
            max_supersteps: DEFAULT_MAX_SUPERSTEPS,
            checkpoint: None,
            kill_at_superstep: None,
            threads: 0,
        }
    }
}

impl RunOptions {
    pub fn seeded(seed: u64) -> Self {
        RunOptions {
            seed,
            ..Default::default()
        }
    }

    fn check_engine(&self, engine: Engine) -> Result<()> {
        if engine != Engine::Pregel && (self.checkpoint.is_some() || self.kill_at_superstep.is_some()) {
            return Err(Error::argument(format!(
                "checkpointing and fault injection need the pregel engine, not {engine}"
            )));
        }
        Ok(())
    }

    fn pregel(&self) -> PregelConfig {
        PregelConfig {
            max_supersteps: self.max_supersteps,
            mode: self.mode,
            checkpoint: self.checkpoint.clone(),
            kill_at_superstep: self.kill_at_superstep,
        }
    }

    fn gas_sync(&self) -> SyncOptions {
        SyncOptions {
            max_iterations: self.max_supersteps,
            mode: self.mode,
            ..Default::default()
        }
    }

    fn gas_async(&self) -> AsyncOptions {
        AsyncOptions {
            mode: self.mode,
            threads: self.threads,
            ..AsyncOptions::seeded(self.seed)
        }
    }

    fn gas_message(&self) -> MessageOptions {
        MessageOptions {
            max_iterations: self.max_supersteps,
            order: QueueOrder::Shuffled(self.seed),
            mode: self.mode,
            ..Default::default()
        }
    }

    fn graph_centric(&self) -> GraphCentricConfig {
        GraphCentricConfig {
            max_supersteps: self.max_supersteps,
            mode: self.mode,
        }
    }
}

fn require_undirected(graph: &Graph, what: &str) -> Result<()> {
    if graph.is_directed() {
        return Err(Error::argument(format!("{what} needs an undirected graph; symmetrize it first")));
    }
    Ok(())
}

/// One `(v)` tuple per vertex.
fn vertex_dataset(graph: &Graph) -> Dataset {
    let tuples = graph.vertices().map(|v| vec![Value::Int(v as i64)]).collect();
    Dataset::new(vec![FieldType::Int], tuples).expect("well-typed")
}

/// `(src, dst)` per edge; both directions for undirected graphs.
fn edge_dataset(graph: &Graph) -> Dataset {
    let tuples = graph
        .vertices()
        .flat_map(|u| {
            graph
                .out_neighbors(u)
                .iter()
                .map(move |&v| vec![Value::Int(u as i64), Value::Int(v as i64)])
        })
        .collect();
    Dataset::new(vec![FieldType::Int, FieldType::Int], tuples).expect("well-typed")
}

/// Reads a sorted `(v, x)` dataset back into a per-vertex vector.
fn per_vertex<T: Clone>(n: usize, data: &Dataset, default: T, f: impl Fn(&Value) -> T) -> Vec<T> {
    let mut out = vec![default; n];
    for t in data.tuples() {
        let v = t[0].as_int().expect("vertex id field") as VertexId;
        out[v] = f(&t[1]);
    }
    out
}

/// Per-vertex deterministic generator, independent of execution order.
fn vertex_rng(seed: u64, v: VertexId) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut z = seed ^ (v as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    rand_chacha::ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}
