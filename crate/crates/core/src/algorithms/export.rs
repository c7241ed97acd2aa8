//! Result export and order-independent checksums.

use std::fmt::Display;
use std::io::Write;

use crate::error::Result;
use crate::graph::{Graph, VertexId};

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Wrapping sum of per-vertex hashes, so the order vertices are visited in
/// does not matter.
fn checksum_bits(values: impl Iterator<Item = u64>) -> u64 {
    values
        .enumerate()
        .fold(0u64, |acc, (v, bits)| acc.wrapping_add(mix(v as u64 ^ mix(bits))))
}

/// Checksum of a labeling. Labels are compared as they are, so two engines
/// agree exactly when they produce the same label per vertex.
pub fn checksum_labels(labels: &[VertexId]) -> u64 {
    checksum_bits(labels.iter().map(|&l| l as u64))
}

/// Checksum of per-vertex floats by bit pattern; -0.0 is folded into 0.0.
pub fn checksum_f64(values: &[f64]) -> u64 {
    checksum_bits(values.iter().map(|&x| if x == 0.0 { 0 } else { x.to_bits() }))
}

/// `vertex<TAB>value` lines under the input file's vertex ids.
pub fn write_vertex_values<T: Display, W: Write>(graph: &Graph, values: &[T], mut out: W) -> Result<()> {
    for (v, x) in values.iter().enumerate() {
        writeln!(out, "{}\t{}", graph.original_id(v), x)?;
    }
    Ok(())
}

/// Component or community labels, translated to the input file's ids so
/// the label names the representative vertex as the user knows it.
pub fn write_labels<W: Write>(graph: &Graph, labels: &[VertexId], out: W) -> Result<()> {
    let named: Vec<u64> = labels.iter().map(|&l| graph.original_id(l)).collect();
    write_vertex_values(graph, &named, out)
}

/// `key=value` lines.
pub fn write_scalars<K: Display, V: Display, W: Write>(pairs: &[(K, V)], mut out: W) -> Result<()> {
    for (k, v) in pairs {
        writeln!(out, "{k}={v}")?;
    }
    Ok(())
}
