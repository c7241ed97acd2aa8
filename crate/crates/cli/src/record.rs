//! Metrics records and their CSV / JSON encodings.

use std::fmt::Write as _;
use std::str::FromStr;

use gpm_core::{Error, Result, RunMetrics};
use serde::{Deserialize, Serialize};

/// Column order of the CSV output. Part of the command's compatibility
/// contract: columns are only ever appended.
pub const CSV_HEADER: [&str; 23] = [
    "algorithm",
    "engine",
    "workers",
    "repetition",
    "vertices",
    "edges",
    "supersteps",
    "messages_sent",
    "messages_delivered",
    "messages_local",
    "messages_remote",
    "payload_bytes",
    "vertex_updates",
    "compute_calls",
    "active_vertices_per_superstep",
    "step_limit_reached",
    "recoveries",
    "wall_time_ms",
    "iterations",
    "converged",
    "summary",
    "checksum",
    "seed",
];

/// One matrix cell: which run, what it cost, and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub algorithm: String,
    pub engine: String,
    pub workers: usize,
    pub repetition: u32,
    pub vertices: usize,
    pub edges: usize,
    pub supersteps: u64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_local: u64,
    pub messages_remote: u64,
    pub payload_bytes: u64,
    pub vertex_updates: u64,
    pub compute_calls: u64,
    pub active_vertices_per_superstep: Vec<u64>,
    pub step_limit_reached: bool,
    pub recoveries: u32,
    /// Left empty unless timing was requested, so output stays reproducible.
    pub wall_time_ms: Option<f64>,
    pub iterations: u64,
    pub converged: bool,
    /// Algorithm-specific headline number; see the README.
    pub summary: Option<f64>,
    /// Order-independent hash of the per-vertex output, as 16 hex digits.
    pub checksum: String,
    pub seed: u64,
}

impl Record {
    pub(crate) fn set_metrics(&mut self, m: &RunMetrics, timing: bool) {
        self.supersteps = m.supersteps;
        self.messages_sent = m.messages_sent;
        self.messages_delivered = m.messages_delivered;
        self.messages_local = m.messages_local;
        self.messages_remote = m.messages_remote;
        self.payload_bytes = m.payload_bytes;
        self.vertex_updates = m.vertex_updates;
        self.compute_calls = m.compute_calls;
        self.active_vertices_per_superstep = m.active_vertices_per_superstep.clone();
        self.step_limit_reached = m.step_limit_reached;
        self.recoveries = m.recoveries;
        self.wall_time_ms = timing.then_some(m.wall_time.as_secs_f64() * 1e3);
    }

    fn csv_fields(&self) -> [String; 23] {
        fn opt(x: Option<f64>) -> String {
            x.map(|v| v.to_string()).unwrap_or_default()
        }
        let active: Vec<String> = self.active_vertices_per_superstep.iter().map(u64::to_string).collect();
        [
            self.algorithm.clone(),
            self.engine.clone(),
            self.workers.to_string(),
            self.repetition.to_string(),
            self.vertices.to_string(),
            self.edges.to_string(),
            self.supersteps.to_string(),
            self.messages_sent.to_string(),
            self.messages_delivered.to_string(),
            self.messages_local.to_string(),
            self.messages_remote.to_string(),
            self.payload_bytes.to_string(),
            self.vertex_updates.to_string(),
            self.compute_calls.to_string(),
            active.join(";"),
            self.step_limit_reached.to_string(),
            self.recoveries.to_string(),
            opt(self.wall_time_ms),
            self.iterations.to_string(),
            self.converged.to_string(),
            opt(self.summary),
            self.checksum.clone(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Argument(format!("unknown output format {s:?}; use csv or json"))),
        }
    }
}

/// Serializes records. An empty list is refused rather than producing a
/// header-only file that looks like a successful run.
pub fn emit_metrics(records: &[Record], format: OutputFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Argument("no records to emit".into()));
    }
    match format {
        OutputFormat::Csv => {
            let mut out = CSV_HEADER.join(",");
            out.push('\n');
            for r in records {
                // no field can contain a comma: names are fixed identifiers
                let _ = writeln!(out, "{}", r.csv_fields().join(","));
            }
            Ok(out)
        }
        OutputFormat::Json => {
            let mut out = serde_json::to_string_pretty(records).map_err(|e| Error::Argument(e.to_string()))?;
            out.push('\n');
            Ok(out)
        }
    }
}

pub fn parse_json(text: &str) -> Result<Vec<Record>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}
