//! Shared fixtures for the criterion benchmarks.

use gpm_core::graph::{dorogovtsev_mendes, partition_hash};
use gpm_core::{Graph, PartitionAssignment, VertexId};

/// Undirected DM graph with `n` vertices, hash-partitioned over `workers`.
pub fn dm_fixture(n: usize, workers: usize, seed: u64) -> (Graph, PartitionAssignment) {
    let g = dorogovtsev_mendes(n, seed).expect("n >= 3");
    let p = partition_hash(&g, workers, seed).expect("workers >= 1");
    (g, p)
}

/// The same graph with every edge as two arcs, for PageRank.
pub fn directed_dm_fixture(n: usize, workers: usize, seed: u64) -> (Graph, PartitionAssignment) {
    let g = dorogovtsev_mendes(n, seed).expect("n >= 3");
    let mut arcs: Vec<(VertexId, VertexId)> = g.edges().collect();
    arcs.extend(g.edges().map(|(u, v)| (v, u)).collect::<Vec<_>>());
    let d = Graph::from_edges(g.num_vertices(), true, &arcs);
    let p = partition_hash(&d, workers, seed).expect("workers >= 1");
    (d, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_shape() {
        let (g, p) = dm_fixture(100, 4, 1);
        assert_eq!((g.num_vertices(), g.num_edges(), p.num_blocks()), (100, 197, 4));
        let (d, _) = directed_dm_fixture(100, 4, 1);
        assert_eq!(d.num_edges(), 2 * 197);
    }
}
