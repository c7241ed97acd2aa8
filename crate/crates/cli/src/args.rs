//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpm_core::algorithms::{ApproxTarget, DEFAULT_ALPHA, DEFAULT_ITERATIONS};
use gpm_core::{Algorithm, Engine, Error, Result};

use crate::bench::{BenchmarkSpec, InputSpec};
use crate::record::OutputFormat;

#[derive(Debug, Parser)]
#[command(name = "gpm", version, about = "Run graph algorithms across programming models and worker counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an algorithm x engine x workers matrix and print one record per run.
    Run(Box<RunArgs>),
    /// Compute the brute-force reference answer for a small graph.
    Oracle(OracleArgs),
    /// Write a generated Dorogovtsev-Mendes graph as an edge list.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    Dm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    AverageLocal,
    Global,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Edge list, one "u v" pair per line.
    #[arg(long, conflicts_with = "generate")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub generate: Option<Generator>,
    #[arg(long, requires = "generate", conflicts_with = "edges_per_worker")]
    pub vertices: Option<usize>,
    /// Weak scaling: each worker count gets its own graph of about
    /// N x workers edges.
    #[arg(long, requires = "generate")]
    pub edges_per_worker: Option<usize>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',', required = true)]
    pub algorithm: Vec<String>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',', required = true)]
    pub engine: Vec<String>,
    /// Logical partitions, not machines. Comma-separated list.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub workers: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// PageRank tolerance mode; without it PageRank runs fixed iterations
    /// (except on gas-async, which always uses a tolerance).
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: u64,
    /// Round budget for community detection.
    #[arg(long, default_value_t = 100)]
    pub max_rounds: u64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, value_enum, default_value = "average-local")]
    pub target: TargetArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repetitions: u32,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Where checkpoints go; a temporary directory by default.
    #[arg(long, requires = "checkpoint_every")]
    pub checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    pub kill_at_superstep: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub output: OutputFormat,
    /// Run each cell on the engine's multi-threaded mode.
    #[arg(long)]
    pub parallel: bool,
    /// Fill in wall_time_ms. Off by default so output is reproducible.
    #[arg(long)]
    pub timing: bool,
    /// Write the first run's per-vertex values here.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Write the first run's key=value summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Write records here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn to_spec(&self) -> Result<BenchmarkSpec> {
        let input = match (&self.input, self.generate, self.vertices, self.edges_per_worker) {
            (Some(p), None, None, None) => InputSpec::File(p.clone()),
            (None, Some(Generator::Dm), Some(n), None) => InputSpec::DmVertices(n),
            (None, Some(Generator::Dm), None, Some(e)) => InputSpec::DmEdgesPerWorker(e),
            (None, Some(Generator::Dm), None, None) => {
                return Err(Error::Argument("--generate dm needs --vertices or --edges-per-worker".into()))
            }
            _ => return Err(Error::Argument("give exactly one of --input or --generate".into())),
        };
        let algorithms = self.algorithm.iter().map(|a| a.parse()).collect::<Result<Vec<Algorithm>>>()?;
        let engines = self.engine.iter().map(|e| e.parse()).collect::<Result<Vec<Engine>>>()?;
        Ok(BenchmarkSpec {
            input,
            algorithms,
            engines,
            workers: self.workers.clone(),
            alpha: self.alpha,
            tolerance: self.tolerance,
            iterations: self.iterations,
            max_rounds: self.max_rounds,
            samples: self.samples,
            target: match self.target {
                TargetArg::AverageLocal => ApproxTarget::AverageLocal,
                TargetArg::Global => ApproxTarget::Global,
            },
            seed: self.seed,
            repetitions: self.repetitions,
            format: self.output,
            checkpoint_every: self.checkpoint_every,
            checkpoint_dir: self.checkpoint_dir.clone(),
            kill_at_superstep: self.kill_at_superstep,
            parallel: self.parallel,
            timing: self.timing,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleAlgorithm {
    Cc,
    Pagerank,
    ClusteringExact,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub algorithm: OracleAlgorithm,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: u64,
    /// Write per-vertex values here.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub vertices: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Destination file; stdout by default.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
