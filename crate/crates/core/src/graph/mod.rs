//! Similarity graphs over fact fragments and their community structure.
//!
//! Fragments that say the same thing end up joined by high-cosine edges and
//! fall into the same Louvain community. A response whose claims scatter into
//! many small communities, or leave nodes with no similar neighbour, is
//! internally fragmented.

pub mod export;
pub mod louvain;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragments::{FactFragment, FragmentSource};
use crate::providers::Embedder;

pub use export::{export_graph, NodeLinkDocument};
pub use louvain::{louvain, louvain_with_trace, LouvainOptions, LouvainTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub text: String,
    pub source: FragmentSource,
}

/// Undirected weighted graph; edges are stored once with `a < b`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, usize, f64)>,
    /// Full pairwise cosine matrix (heatmap data); empty for graphs built from
    /// explicit edges.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub similarity: Vec<Vec<f64>>,
}

impl FactGraph {
    /// Graph with placeholder node texts and the given edges. Self-loops and
    /// duplicate pairs are rejected.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let nodes = (0..node_count)
            .map(|id| GraphNode {
                id,
                text: format!("node {id}"),
                source: FragmentSource::Response,
            })
            .collect();
        let mut normalized: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(a, b, w) in edges {
            if a == b || a >= node_count || b >= node_count {
                return Err(Error::InvalidInput(format!("invalid edge ({a}, {b})")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("edge weight {w} must be positive")));
            }
            normalized.push((a.min(b), a.max(b), w));
        }
        normalized.sort_by_key(|e| (e.0, e.1));
        if normalized.windows(2).any(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(Error::InvalidInput("duplicate edge".into()));
        }
        Ok(Self {
            nodes,
            edges: normalized,
            similarity: Vec::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `neighbors[i]` lists `(j, weight)` for every edge incident to `i`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b, w) in &self.edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        adj
    }

    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.nodes.len()];
        for &(a, b, w) in &self.edges {
            deg[a] += w;
            deg[b] += w;
        }
        deg
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }
}

/// One node per fragment, in input order; an edge wherever cosine similarity
/// strictly exceeds `edge_threshold`, weighted by that similarity.
pub fn build_graph(
    fragments: &[FactFragment],
    embedder: &dyn Embedder,
    edge_threshold: f64,
) -> Result<FactGraph> {
    let nodes: Vec<GraphNode> = fragments
        .iter()
        .enumerate()
        .map(|(id, f)| GraphNode {
            id,
            text: f.text.clone(),
            source: f.source,
        })
        .collect();
    if nodes.is_empty() {
        return Ok(FactGraph {
            nodes,
            edges: Vec::new(),
            similarity: Vec::new(),
        });
    }
    let texts: Vec<&str> = fragments.iter().map(|f| f.text.as_str()).collect();
    let vectors = embedder.embed(&texts)?;
    let n = nodes.len();
    let mut similarity = vec![vec![0.0; n]; n];
    let mut edges = Vec::new();
    for i in 0..n {
        similarity[i][i] = 1.0;
        for j in (i + 1)..n {
            let s = vectors[i].cosine(&vectors[j])?;
            similarity[i][j] = s;
            similarity[j][i] = s;
            if s > edge_threshold {
                edges.push((i, j, s));
            }
        }
    }
    Ok(FactGraph {
        nodes,
        edges,
        similarity,
    })
}

/// Community assignment with dense ids numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub community_of: Vec<usize>,
    pub community_count: usize,
}

impl Partition {
    /// Relabels arbitrary labels densely, in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let community_of: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            community_count: map.len(),
            community_of,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            community_of: (0..n).collect(),
            community_count: n,
        }
    }

    pub fn all_in_one(n: usize) -> Self {
        Self {
            community_of: vec![0; n],
            community_count: usize::from(n > 0),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.community_count];
        for &c in &self.community_of {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.community_count];
        for (node, &c) in self.community_of.iter().enumerate() {
            members[c].push(node);
        }
        members
    }
}

/// Weighted Newman modularity with resolution `γ`:
/// `Q = (1/2m) Σ_ij [A_ij − γ k_i k_j / 2m] δ(c_i, c_j)`. 0 for edgeless graphs.
pub fn modularity(graph: &FactGraph, partition: &Partition, resolution: f64) -> Result<f64> {
    if partition.community_of.len() != graph.node_count() {
        return Err(Error::InvalidInput(format!(
            "partition covers {} nodes, graph has {}",
            partition.community_of.len(),
            graph.node_count()
        )));
    }
    let m = graph.total_weight();
    if m <= 0.0 {
        return Ok(0.0);
    }
    let comm = &partition.community_of;
    let count = comm.iter().copied().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0; count];
    let mut total = vec![0.0; count];
    for &(a, b, w) in &graph.edges {
        total[comm[a]] += w;
        total[comm[b]] += w;
        if comm[a] == comm[b] {
            internal[comm[a]] += w;
        }
    }
    let two_m = 2.0 * m;
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(&inner, &tot)| 2.0 * inner / two_m - resolution * (tot / two_m).powi(2))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationReport {
    pub community_count: usize,
    /// `1 − |largest community| / |nodes|`; 0 for graphs with fewer than two nodes.
    pub fragmentation: f64,
    pub isolated_node_count: usize,
    /// Nodes with no edges, or whose strongest edge is below the threshold.
    pub low_similarity_nodes: Vec<usize>,
}

pub fn fragmentation(
    graph: &FactGraph,
    partition: &Partition,
    low_sim_threshold: f64,
) -> Result<FragmentationReport> {
    let n = graph.node_count();
    if partition.community_of.len() != n {
        return Err(Error::InvalidInput(format!(
            "partition covers {} nodes, graph has {}",
            partition.community_of.len(),
            n
        )));
    }
    let largest = partition.sizes().into_iter().max().unwrap_or(0);
    let fragmentation = if n < 2 {
        0.0
    } else {
        1.0 - largest as f64 / n as f64
    };
    let mut max_edge = vec![f64::NEG_INFINITY; n];
    let mut degree = vec![0usize; n];
    for &(a, b, w) in &graph.edges {
        degree[a] += 1;
        degree[b] += 1;
        max_edge[a] = max_edge[a].max(w);
        max_edge[b] = max_edge[b].max(w);
    }
    let isolated_node_count = degree.iter().filter(|&&d| d == 0).count();
    let low_similarity_nodes = (0..n)
        .filter(|&i| degree[i] == 0 || max_edge[i] < low_sim_threshold)
        .collect();
    Ok(FragmentationReport {
        community_count: partition.community_count,
        fragmentation,
        isolated_node_count,
        low_similarity_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::split_fragments;
    use crate::providers::FixtureEmbedder;

    fn clique(nodes: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::new();
        for (i, &a) in nodes.iter().enumerate() {
            for &b in &nodes[i + 1..] {
                edges.push((a, b, 1.0));
            }
        }
        edges
    }

    #[test]
    fn single_fragment_graph() {
        let g = build_graph(&split_fragments("TiO2 is stable."), &FixtureEmbedder::default(), 0.55).unwrap();
        assert_eq!(g.node_count(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn identical_fragments_share_an_edge() {
        let g = build_graph(
            &split_fragments("TiO2 is stable. TiO2 is stable."),
            &FixtureEmbedder::default(),
            0.55,
        )
        .unwrap();
        assert_eq!(g.edges.len(), 1);
        assert!((g.edges[0].2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edges_match_pairwise_oracle() {
        let e = FixtureEmbedder::default();
        let frags = split_fragments(
            "Copper is ductile. Copper is very ductile. Graphene is strong. Copper is not ductile.",
        );
        let g = build_graph(&frags, &e, 0.55).unwrap();
        let mut oracle = Vec::new();
        for i in 0..frags.len() {
            for j in (i + 1)..frags.len() {
                let a = e.embed_one(&frags[i].text).unwrap();
                let b = e.embed_one(&frags[j].text).unwrap();
                let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
                if dot > 0.55 {
                    oracle.push((i, j));
                }
            }
        }
        let got: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(got, oracle);
        assert!(g.edges.iter().all(|e| e.2 > 0.55 && e.2 <= 1.0 + 1e-12));
        assert!(!oracle.is_empty());
    }

    #[test]
    fn modularity_examples() {
        let mut edges = clique(&[0, 1, 2]);
        edges.extend(clique(&[3, 4, 5]));
        let g = FactGraph::from_edges(6, &edges).unwrap();
        assert!(modularity(&g, &Partition::all_in_one(6), 1.0).unwrap().abs() < 1e-12);
        let split = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        assert!((modularity(&g, &split, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(modularity(&g, &Partition::singletons(5), 1.0).is_err());
        let empty = FactGraph::from_edges(3, &[]).unwrap();
        assert_eq!(modularity(&empty, &Partition::singletons(3), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn fragmentation_examples() {
        let g = FactGraph::from_edges(4, &clique(&[0, 1, 2, 3])).unwrap();
        let r = fragmentation(&g, &Partition::all_in_one(4), 0.4).unwrap();
        assert_eq!(r.fragmentation, 0.0);
        assert_eq!(r.isolated_node_count, 0);
        assert!(r.low_similarity_nodes.is_empty());

        let g = FactGraph::from_edges(4, &[]).unwrap();
        let r = fragmentation(&g, &Partition::singletons(4), 0.4).unwrap();
        assert_eq!(r.fragmentation, 0.75);
        assert_eq!(r.isolated_node_count, 4);
        assert_eq!(r.low_similarity_nodes, [0, 1, 2, 3]);

        let g = FactGraph::from_edges(0, &[]).unwrap();
        let r = fragmentation(&g, &Partition::singletons(0), 0.4).unwrap();
        assert_eq!(r.fragmentation, 0.0);
        assert_eq!(r.community_count, 0);
        assert_eq!(r.isolated_node_count, 0);
    }

    #[test]
    fn weak_edges_flag_low_similarity() {
        let g = FactGraph::from_edges(3, &[(0, 1, 0.9), (1, 2, 0.3)]).unwrap();
        let r = fragmentation(&g, &Partition::all_in_one(3), 0.4).unwrap();
        assert_eq!(r.low_similarity_nodes, [2]);
    }

    #[test]
    fn fragmentation_invariant_under_relabeling() {
        let g = FactGraph::from_edges(5, &[(0, 1, 0.9), (2, 3, 0.8)]).unwrap();
        let p = Partition::from_labels(&[0, 0, 1, 1, 2]);
        let base = fragmentation(&g, &p, 0.4).unwrap();
        // permutation σ = [4, 2, 0, 1, 3]
        let perm = [4usize, 2, 0, 1, 3];
        let edges: Vec<_> = g.edges.iter().map(|&(a, b, w)| (perm[a], perm[b], w)).collect();
        let g2 = FactGraph::from_edges(5, &edges).unwrap();
        let mut labels = vec![0; 5];
        for (old, &new) in perm.iter().enumerate() {
            labels[new] = p.community_of[old];
        }
        let r = fragmentation(&g2, &Partition::from_labels(&labels), 0.4).unwrap();
        assert_eq!(r.fragmentation, base.fragmentation);
        assert_eq!(r.community_count, base.community_count);
        assert_eq!(r.isolated_node_count, base.isolated_node_count);
        assert_eq!(r.low_similarity_nodes, vec![perm[4]]);
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(FactGraph::from_edges(2, &[(0, 0, 1.0)]).is_err());
        assert!(FactGraph::from_edges(2, &[(0, 2, 1.0)]).is_err());
        assert!(FactGraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 0.5)]).is_err());
        assert!(FactGraph::from_edges(2, &[(0, 1, 0.0)]).is_err());
    }
}
