//! Brute-force reference computations, deliberately sharing no code with
//! the engines: union-find, dense matrix iteration and triple enumeration.

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};

/// Largest graph the dense and cubic oracles accept.
pub const ORACLE_MAX_VERTICES: usize = 2_000;

fn guard(graph: &Graph) -> Result<()> {
    if graph.num_vertices() > ORACLE_MAX_VERTICES {
        return Err(Error::argument(format!(
            "oracles handle at most {ORACLE_MAX_VERTICES} vertices, got {}",
            graph.num_vertices()
        )));
    }
    Ok(())
}

/// Component labels as the smallest vertex id of each component. Edge
/// direction is ignored.
pub fn oracle_components(graph: &Graph) -> Result<Vec<VertexId>> {
    guard(graph)?;
    let n = graph.num_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (u, v) in graph.edges() {
        let (a, b) = (root(&mut parent, u), root(&mut parent, v));
        if a != b {
            // smaller root wins, so every root is its component's minimum
            parent[a.max(b)] = a.min(b);
        }
    }
    Ok((0..n).map(|v| root(&mut parent, v)).collect())
}

/// `iterations` synchronous rounds from all-ones, computed as a dense
/// matrix-vector product.
pub fn oracle_pagerank(graph: &Graph, alpha: f64, iterations: u64) -> Result<Vec<f64>> {
    guard(graph)?;
    let n = graph.num_vertices();
    let m = transition(graph);
    let mut p = vec![1.0; n];
    for _ in 0..iterations {
        p = step(&m, &p, alpha);
    }
    Ok(p)
}

/// Iterates the same rule until successive vectors agree to 1e-15 (or a
/// generous round cap is hit).
pub fn oracle_pagerank_fixpoint(graph: &Graph, alpha: f64) -> Result<Vec<f64>> {
    guard(graph)?;
    let m = transition(graph);
    let mut p = vec![1.0; graph.num_vertices()];
    for _ in 0..100_000 {
        let next = step(&m, &p, alpha);
        let diff = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if diff < 1e-15 {
            break;
        }
    }
    Ok(p)
}

/// Row v holds 1/outdeg(u) at column u for each edge u -> v.
fn transition(graph: &Graph) -> Vec<Vec<f64>> {
    let n = graph.num_vertices();
    let mut m = vec![vec![0.0; n]; n];
    let directed = graph.is_directed();
    for (u, v) in graph.edges() {
        m[v][u] += 1.0 / graph.out_degree(u) as f64;
        if !directed {
            m[u][v] += 1.0 / graph.out_degree(v) as f64;
        }
    }
    m
}

fn step(m: &[Vec<f64>], p: &[f64], alpha: f64) -> Vec<f64> {
    m.iter()
        .map(|row| alpha + (1.0 - alpha) * row.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleCounts {
    /// Triangles through each vertex.
    pub per_vertex: Vec<u64>,
    pub triangles: u64,
    /// Paths of length two, i.e. sum of deg(v) choose 2.
    pub triplets: u64,
}

impl TriangleCounts {
    pub fn local(&self, graph: &Graph, v: VertexId) -> Option<f64> {
        let d = graph.degree(v) as u64;
        (d >= 2).then(|| self.per_vertex[v] as f64 / (d * (d - 1) / 2) as f64)
    }

    pub fn global(&self) -> f64 {
        if self.triplets == 0 {
            0.0
        } else {
            (3 * self.triangles) as f64 / self.triplets as f64
        }
    }
}

/// Checks every vertex triple against a dense adjacency matrix.
pub fn oracle_triangles(graph: &Graph) -> Result<TriangleCounts> {
    guard(graph)?;
    let n = graph.num_vertices();
    let mut adj = vec![vec![false; n]; n];
    for (u, v) in graph.edges() {
        if u != v {
            adj[u][v] = true;
            adj[v][u] = true;
        }
    }
    let mut per_vertex = vec![0u64; n];
    let mut triangles = 0;
    for a in 0..n {
        for b in a + 1..n {
            if !adj[a][b] {
                continue;
            }
            for c in b + 1..n {
                if adj[a][c] && adj[b][c] {
                    triangles += 1;
                    per_vertex[a] += 1;
                    per_vertex[b] += 1;
                    per_vertex[c] += 1;
                }
            }
        }
    }
    let triplets = adj
        .iter()
        .map(|row| {
            let d = row.iter().filter(|&&x| x).count() as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    Ok(TriangleCounts {
        per_vertex,
        triangles,
        triplets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete;

    #[test]
    fn small_cases() {
        let g = Graph::from_edges(4, false, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(oracle_components(&g).unwrap(), vec![0, 0, 0, 3]);
        let single = Graph::from_edges(1, true, &[]);
        assert_eq!(oracle_pagerank(&single, 0.15, 1).unwrap(), vec![0.15]);
        let k4 = oracle_triangles(&complete(4)).unwrap();
        assert_eq!(k4.per_vertex, vec![3; 4]);
        assert_eq!((k4.triangles, k4.triplets), (4, 12));
    }

    #[test]
    fn size_guard() {
        let g = Graph::from_edges(ORACLE_MAX_VERTICES + 1, false, &[]);
        assert!(matches!(oracle_components(&g), Err(Error::Argument(_))));
        assert!(matches!(oracle_triangles(&g), Err(Error::Argument(_))));
    }
}
