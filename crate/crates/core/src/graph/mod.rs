//! Immutable compressed adjacency graphs.
//!
//! Vertex ids are dense integers `0..n`. Loaders remap whatever ids the
//! input uses and keep the original id of every vertex for output. Graphs
//! are always simple: self-loops are dropped and parallel edges collapse to
//! one. Undirected graphs store each edge in both adjacency lists.

mod generate;
mod io;
mod partition;

use std::ops::Range;

pub use generate::{complete, cycle, dorogovtsev_mendes, erdos_renyi, path, star};
pub use io::{load_edge_list, write_edge_list};
pub use partition::{partition_hash, BlockSubgraph, PartitionAssignment};

pub type VertexId = usize;

/// Index of an edge attachment slot. Both directions of an undirected edge
/// share a slot; every arc of a directed graph has its own.
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    edge_ids: Vec<EdgeId>,
}

impl Csr {
    fn range(&self, v: VertexId) -> Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    directed: bool,
    num_edges: usize,
    out: Csr,
    /// Transposed adjacency, only materialised for directed graphs.
    inc: Option<Csr>,
    original_ids: Vec<u64>,
}

impl Graph {
    /// Builds a graph over vertices `0..n`. Self-loops are dropped and
    /// duplicates (including reversed pairs when undirected) are merged.
    ///
    /// Panics if an endpoint is `>= n`.
    pub fn from_edges(n: usize, directed: bool, edges: &[(VertexId, VertexId)]) -> Graph {
        Self::with_original_ids(directed, edges, (0..n as u64).collect())
    }

    pub(crate) fn with_original_ids(
        directed: bool,
        edges: &[(VertexId, VertexId)],
        original_ids: Vec<u64>,
    ) -> Graph {
        let n = original_ids.len();
        let mut arcs: Vec<(VertexId, VertexId)> = Vec::with_capacity(if directed {
            edges.len()
        } else {
            2 * edges.len()
        });
        for &(u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for {n} vertices");
            if u == v {
                continue;
            }
            arcs.push((u, v));
            if !directed {
                arcs.push((v, u));
            }
        }
        arcs.sort_unstable();
        arcs.dedup();

        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &arcs {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<VertexId> = arcs.iter().map(|&(_, v)| v).collect();

        let (num_edges, out, inc) = if directed {
            let edge_ids: Vec<EdgeId> = (0..targets.len()).collect();
            let out = Csr {
                offsets,
                targets,
                edge_ids,
            };
            let inc = transpose(n, &out);
            (arcs.len(), out, Some(inc))
        } else {
            let mut edge_ids = vec![usize::MAX; targets.len()];
            let mut next = 0;
            for u in 0..n {
                for pos in offsets[u]..offsets[u + 1] {
                    let v = targets[pos];
                    if u < v {
                        edge_ids[pos] = next;
                        next += 1;
                    } else {
                        let back = &targets[offsets[v]..offsets[v + 1]];
                        let i = back.binary_search(&u).expect("symmetric adjacency");
                        edge_ids[pos] = edge_ids[offsets[v] + i];
                    }
                }
            }
            debug_assert_eq!(next * 2, targets.len());
            let out = Csr {
                offsets,
                targets,
                edge_ids,
            };
            (next, out, None)
        };

        Graph {
            directed,
            num_edges,
            out,
            inc,
            original_ids,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.original_ids.len()
    }

    /// Number of edges: arcs for directed graphs, unordered pairs otherwise.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn vertices(&self) -> Range<VertexId> {
        0..self.num_vertices()
    }

    pub fn out_neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.out.targets[self.out.range(v)]
    }

    pub fn in_neighbors(&self, v: VertexId) -> &[VertexId] {
        let csr = self.inc.as_ref().unwrap_or(&self.out);
        &csr.targets[csr.range(v)]
    }

    /// Neighbours of `v` in an undirected graph; out-neighbours otherwise.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        self.out_neighbors(v)
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.out.offsets[v + 1] - self.out.offsets[v]
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.in_neighbors(v).len()
    }

    pub fn degree(&self, v: VertexId) -> usize {
        if self.directed {
            self.out_degree(v) + self.in_degree(v)
        } else {
            self.out_degree(v)
        }
    }

    pub fn max_degree(&self) -> usize {
        self.vertices().map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// `(target, edge id)` for every arc leaving `v`.
    pub fn out_edges(&self, v: VertexId) -> impl Iterator<Item = (VertexId, EdgeId)> + '_ {
        let r = self.out.range(v);
        self.out.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.out.edge_ids[r].iter().copied())
    }

    /// `(source, edge id)` for every arc entering `v`.
    pub fn in_edges(&self, v: VertexId) -> impl Iterator<Item = (VertexId, EdgeId)> + '_ {
        let csr = self.inc.as_ref().unwrap_or(&self.out);
        let r = csr.range(v);
        csr.targets[r.clone()]
            .iter()
            .copied()
            .zip(csr.edge_ids[r].iter().copied())
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.out_neighbors(u).binary_search(&v).is_ok()
    }

    /// Number of edge attachment slots, i.e. one past the largest [`EdgeId`].
    pub fn num_edge_slots(&self) -> usize {
        self.num_edges
    }

    /// Every edge once: arcs `(u, v)` when directed, pairs with `u < v`
    /// otherwise. Sorted.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        let directed = self.directed;
        self.vertices().flat_map(move |u| {
            self.out_neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| directed || u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn original_id(&self, v: VertexId) -> u64 {
        self.original_ids[v]
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }
}

fn transpose(n: usize, out: &Csr) -> Csr {
    let mut offsets = vec![0usize; n + 1];
    for &v in &out.targets {
        offsets[v + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut targets = vec![0; out.targets.len()];
    let mut edge_ids = vec![0; out.targets.len()];
    for u in 0..n {
        for pos in out.range(u) {
            let v = out.targets[pos];
            targets[fill[v]] = u;
            edge_ids[fill[v]] = out.edge_ids[pos];
            fill[v] += 1;
        }
    }
    Csr {
        offsets,
        targets,
        edge_ids,
    }
}
