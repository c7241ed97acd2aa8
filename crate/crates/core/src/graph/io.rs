use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Graph, VertexId};
use crate::error::{Error, Result};

/// Reads a whitespace-separated edge list, one `u v` pair per line.
///
/// Lines starting with `%` or `#` are comments and blank lines are ignored.
/// Ids are remapped to `0..n` in order of first appearance. A vertex that
/// only appears in a self-loop is kept as an isolated vertex.
pub fn load_edge_list<R: BufRead>(reader: R, directed: bool) -> Result<Graph> {
    let mut remap: HashMap<u64, VertexId> = HashMap::new();
    let mut original_ids = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |raw: u64| -> VertexId {
        *remap.entry(raw).or_insert_with(|| {
            original_ids.push(raw);
            original_ids.len() - 1
        })
    };

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected two vertex ids, got {trimmed:?}"),
            });
        };
        let parse = |tok: &str| {
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("{tok:?} is not a non-negative integer"),
            })
        };
        let (a, b) = (parse(a)?, parse(b)?);
        let u = intern(a);
        let v = intern(b);
        edges.push((u, v));
    }

    Ok(Graph::with_original_ids(directed, &edges, original_ids))
}

/// Writes `graph` in the format accepted by [`load_edge_list`], using the
/// original vertex ids. Isolated vertices are not representable and are
/// omitted.
pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W) -> Result<()> {
    writeln!(
        out,
        "% {} n={} m={}",
        if graph.is_directed() { "directed" } else { "undirected" },
        graph.num_vertices(),
        graph.num_edges()
    )?;
    for (u, v) in graph.edges() {
        writeln!(out, "{} {}", graph.original_id(u), graph.original_id(v))?;
    }
    Ok(())
}
