use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, VertexId};
use crate::error::{Error, Result};

/// Dorogovtsev-Mendes scale-free graph: start from a triangle, then attach
/// every new vertex to both endpoints of a uniformly chosen existing edge.
/// The result has `2n - 3` edges and is connected.
pub fn dorogovtsev_mendes(target_vertices: usize, seed: u64) -> Result<Graph> {
    if target_vertices < 3 {
        return Err(Error::argument(format!(
            "Dorogovtsev-Mendes needs at least 3 vertices, got {target_vertices}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(VertexId, VertexId)> = Vec::with_capacity(2 * target_vertices - 3);
    edges.extend([(0, 1), (1, 2), (0, 2)]);
    for v in 3..target_vertices {
        let (a, b) = edges[rng.random_range(0..edges.len())];
        edges.push((a, v));
        edges.push((b, v));
    }
    Ok(Graph::from_edges(target_vertices, false, &edges))
}

/// G(n, p) random graph. Directed graphs draw every ordered pair.
pub fn erdos_renyi(n: usize, p: f64, directed: bool, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        let start = if directed { 0 } else { u + 1 };
        for v in start..n {
            if u != v && rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, directed, &edges)
}

/// Undirected path `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    Graph::from_edges(n, false, &edges)
}

/// Undirected cycle on `n` vertices.
pub fn cycle(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    Graph::from_edges(n, false, &edges)
}

/// Star with hub `0` and leaves `1..=leaves`. The directed variant has
/// arcs in both directions between the hub and every leaf.
pub fn star(leaves: usize, directed: bool) -> Graph {
    let mut edges: Vec<_> = (1..=leaves).map(|v| (v, 0)).collect();
    if directed {
        edges.extend((1..=leaves).map(|v| (0, v)));
    }
    Graph::from_edges(leaves + 1, directed, &edges)
}

/// Complete undirected graph `K_n`.
pub fn complete(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, false, &edges)
}
