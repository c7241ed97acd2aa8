//! Benchmark driver behind the `gpm` command.

pub mod args;
pub mod bench;
pub mod record;

use std::io::Write;

use gpm_core::algorithms::{write_labels, write_scalars, write_vertex_values};
use gpm_core::{Error, Graph, Result};

pub use bench::{run_benchmark, run_cell, BenchmarkSpec, CellOutput, InputSpec, VertexValues};
pub use record::{emit_metrics, parse_json, OutputFormat, Record, CSV_HEADER};

pub use bench::{checksum_coefficients, hex, load_graph};

/// Process exit status for a failed command.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Parse { .. } => 2,
        Error::Contract(_) | Error::Routing { .. } | Error::Plan(_) => 3,
        Error::Resource(_) => 4,
        _ => 1,
    }
}

/// Writes per-vertex output as `vertex<TAB>value` lines.
pub fn write_values<W: Write>(graph: &Graph, values: &VertexValues, mut out: W) -> Result<()> {
    match values {
        VertexValues::Labels(l) => write_labels(graph, l, out),
        VertexValues::Scores(s) => write_vertex_values(graph, s, out),
        VertexValues::Coefficients(c) => {
            for (v, x) in c.iter().enumerate() {
                if let Some(x) = x {
                    writeln!(out, "{}\t{}", graph.original_id(v), x)?;
                }
            }
            Ok(())
        }
        VertexValues::None => Ok(()),
    }
}

pub fn write_summary<W: Write>(scalars: &[(String, String)], out: W) -> Result<()> {
    write_scalars(scalars, out)
}
