use serde::{Deserialize, Serialize};

use super::{Graph, VertexId};
use crate::error::{Error, Result};

/// Maps every vertex to one of `k` blocks. Blocks double as simulated
/// workers: block `b` is owned by worker `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    k: usize,
    owner: Vec<usize>,
}

impl PartitionAssignment {
    /// Wraps an explicit owner table.
    pub fn from_owners(k: usize, owner: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::argument("block count must be positive"));
        }
        if let Some((v, &b)) = owner.iter().enumerate().find(|(_, &b)| b >= k) {
            return Err(Error::argument(format!(
                "vertex {v} assigned to block {b}, but only {k} blocks exist"
            )));
        }
        Ok(PartitionAssignment { k, owner })
    }

    /// Everything in block 0.
    pub fn single(n: usize) -> Self {
        PartitionAssignment {
            k: 1,
            owner: vec![0; n],
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, v: VertexId) -> usize {
        self.owner[v]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    /// Vertices of `block`, ascending.
    pub fn block_vertices(&self, block: usize) -> Vec<VertexId> {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == block)
            .map(|(v, _)| v)
            .collect()
    }

    /// Vertices of every block, each list ascending.
    pub fn blocks(&self) -> Vec<Vec<VertexId>> {
        let mut blocks = vec![Vec::new(); self.k];
        for (v, &b) in self.owner.iter().enumerate() {
            blocks[b].push(v);
        }
        blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &b in &self.owner {
            sizes[b] += 1;
        }
        sizes
    }

    pub(crate) fn check_graph(&self, graph: &Graph) -> Result<()> {
        if self.owner.len() != graph.num_vertices() {
            return Err(Error::argument(format!(
                "partition covers {} vertices, graph has {}",
                self.owner.len(),
                graph.num_vertices()
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `owner(v) = splitmix64(v ^ splitmix64(seed)) mod k`.
pub fn partition_hash(graph: &Graph, k: usize, seed: u64) -> Result<PartitionAssignment> {
    if k == 0 {
        return Err(Error::argument("block count must be positive"));
    }
    let salt = splitmix64(seed);
    let owner = graph
        .vertices()
        .map(|v| (splitmix64(v as u64 ^ salt) % k as u64) as usize)
        .collect();
    Ok(PartitionAssignment { k, owner })
}

/// The subgraph `G_i` of one block: its internal vertices, the boundary
/// vertices adjacent to them, and every edge with an internal endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSubgraph {
    pub block: usize,
    /// Owned vertices, ascending.
    pub internal: Vec<VertexId>,
    /// Non-owned vertices adjacent to an internal vertex, ascending.
    pub boundary: Vec<VertexId>,
    /// Edges with at least one internal endpoint, in [`Graph::edges`] form.
    pub edges: Vec<(VertexId, VertexId)>,
}

impl BlockSubgraph {
    pub fn build(graph: &Graph, assignment: &PartitionAssignment, block: usize) -> Result<Self> {
        assignment.check_graph(graph)?;
        if block >= assignment.num_blocks() {
            return Err(Error::argument(format!(
                "block {block} out of range for {} blocks",
                assignment.num_blocks()
            )));
        }
        let internal = assignment.block_vertices(block);
        let mut boundary = Vec::new();
        for &v in &internal {
            let adjacent = graph.out_neighbors(v).iter().chain(if graph.is_directed() {
                graph.in_neighbors(v).iter()
            } else {
                [].iter()
            });
            boundary.extend(adjacent.copied().filter(|&u| assignment.owner(u) != block));
        }
        boundary.sort_unstable();
        boundary.dedup();
        let edges = graph
            .edges()
            .filter(|&(u, v)| assignment.owner(u) == block || assignment.owner(v) == block)
            .collect();
        Ok(BlockSubgraph {
            block,
            internal,
            boundary,
            edges,
        })
    }

    pub fn is_internal(&self, v: VertexId) -> bool {
        self.internal.binary_search(&v).is_ok()
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.is_internal(v) || self.is_boundary(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, dorogovtsev_mendes, erdos_renyi, path};

    #[test]
    fn single_block_owns_everything() {
        let g = path(10);
        let p = partition_hash(&g, 1, 3).unwrap();
        assert!(p.owners().iter().all(|&b| b == 0));
        let b = BlockSubgraph::build(&g, &p, 0).unwrap();
        assert_eq!(b.internal, (0..10).collect::<Vec<_>>());
        assert!(b.boundary.is_empty());
        assert_eq!(b.edges.len(), 9);
    }

    #[test]
    fn zero_blocks_rejected() {
        let g = path(3);
        assert!(matches!(partition_hash(&g, 0, 0), Err(Error::Argument(_))));
        assert!(PartitionAssignment::from_owners(0, vec![]).is_err());
        assert!(PartitionAssignment::from_owners(2, vec![0, 2]).is_err());
    }

    #[test]
    fn hash_partition_is_deterministic_and_balanced() {
        let g = erdos_renyi(1000, 0.0, false, 0);
        let a = partition_hash(&g, 4, 0).unwrap();
        let b = partition_hash(&g, 4, 0).unwrap();
        assert_eq!(a, b);
        let sizes = a.block_sizes();
        // regression values for splitmix64 with seed 0
        assert_eq!(sizes, vec![239, 274, 233, 254]);
        assert!(sizes.iter().all(|&s| (150..=350).contains(&s)));
        assert_eq!(sizes.iter().sum::<usize>(), 1000);
    }

    #[test]
    fn path_blocks() {
        let g = path(4);
        let p = PartitionAssignment::from_owners(2, vec![0, 0, 1, 1]).unwrap();
        let b0 = BlockSubgraph::build(&g, &p, 0).unwrap();
        assert_eq!(b0.internal, vec![0, 1]);
        assert_eq!(b0.boundary, vec![2]);
        assert_eq!(b0.edges, vec![(0, 1), (1, 2)]);
        assert!(matches!(
            BlockSubgraph::build(&g, &p, 2),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn two_blocks_with_cross_edges() {
        // P1 = {0,1,2}, P2 = {3,4,5}; cross edges 1-3, 2-3, 2-4
        let g = Graph::from_edges(
            6,
            false,
            &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (4, 5)],
        );
        let p = PartitionAssignment::from_owners(2, vec![0, 0, 0, 1, 1, 1]).unwrap();
        let b0 = BlockSubgraph::build(&g, &p, 0).unwrap();
        let b1 = BlockSubgraph::build(&g, &p, 1).unwrap();
        assert_eq!(b0.boundary, vec![3, 4]);
        assert_eq!(b1.boundary, vec![1, 2]);
        assert_eq!(b0.edges.len(), 6);
        assert_eq!(b1.edges.len(), 5);
        for b in [&b0, &b1] {
            for &x in &b.boundary {
                assert!(g.neighbors(x).iter().any(|&y| b.is_internal(y)));
            }
        }
    }

    #[test]
    fn block_invariants_hold_on_random_graphs() {
        for seed in 0..5 {
            let graphs = [
                dorogovtsev_mendes(300, seed).unwrap(),
                erdos_renyi(200, 0.02, true, seed),
                complete(12),
            ];
            for g in &graphs {
                for k in [1, 2, 3, 8] {
                    let p = partition_hash(g, k, seed).unwrap();
                    let mut covered = 0;
                    for block in 0..k {
                        let b = BlockSubgraph::build(g, &p, block).unwrap();
                        covered += b.internal.len();
                        assert!(b.internal.iter().all(|&v| !b.is_boundary(v)));
                        for &x in &b.boundary {
                            let touches = g
                                .out_neighbors(x)
                                .iter()
                                .chain(g.in_neighbors(x))
                                .any(|&y| b.is_internal(y));
                            assert!(touches);
                        }
                    }
                    assert_eq!(covered, g.num_vertices());
                }
            }
        }
    }
}
