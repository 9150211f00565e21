//! Two-phase Louvain modularity maximization.
//!
//! Phase one moves single nodes to the neighbouring community with the largest
//! positive modularity gain until a full sweep makes no move. Phase two
//! collapses each community into one node (internal weight becomes a
//! self-loop) and the process repeats on the smaller graph. Node order is
//! ascending id unless a seed asks for a shuffled order; ties go to the lowest
//! community id.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{modularity, FactGraph, Partition};
use crate::error::Result;

/// Smallest gain improvement that counts as a move.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainOptions {
    pub resolution: f64,
    /// `None` visits nodes in ascending id order. `Some(seed)` uses a seeded
    /// shuffle of that order in every sweep.
    pub seed: Option<u64>,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            seed: None,
        }
    }
}

/// Final partition plus the partition and modularity after every pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LouvainTrace {
    pub partition: Partition,
    /// `modularity[0]` is the all-singletons value; one entry per pass after that.
    pub modularity: Vec<f64>,
    pub passes: Vec<Partition>,
}

/// Working graph for one level: adjacency without self-loops plus per-node loop
/// weight. A loop of weight `w` adds `2w` to the node's degree.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
}

impl Level {
    fn from_graph(graph: &FactGraph) -> Self {
        Self {
            adj: graph.adjacency(),
            self_loop: vec![0.0; graph.node_count()],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn degrees(&self) -> Vec<f64> {
        self.adj
            .iter()
            .zip(&self.self_loop)
            .map(|(nbrs, l)| nbrs.iter().map(|e| e.1).sum::<f64>() + 2.0 * l)
            .collect()
    }

    /// Local moving phase. Returns dense community labels and whether any node moved.
    fn local_moves(&self, resolution: f64, rng: Option<&mut ChaCha8Rng>) -> (Vec<usize>, bool) {
        let n = self.len();
        let degree = self.degrees();
        let two_m: f64 = degree.iter().sum();
        let mut community: Vec<usize> = (0..n).collect();
        if two_m <= 0.0 {
            return (community, false);
        }
        let mut total = degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = rng;
        let mut weight_to = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        loop {
            if let Some(r) = rng.as_deref_mut() {
                order.shuffle(r);
            }
            let mut moved = false;
            for &node in &order {
                let own = community[node];
                for &(nbr, w) in &self.adj[node] {
                    let c = community[nbr];
                    if weight_to[c] == 0.0 {
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                total[own] -= degree[node];
                let k = degree[node];
                let gain = |c: usize, w_in: f64| w_in - resolution * total[c] * k / two_m;
                let mut best = own;
                let mut best_gain = gain(own, weight_to[own]);
                touched.sort_unstable();
                for &c in &touched {
                    if c == own {
                        continue;
                    }
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                total[best] += k;
                if best != own {
                    community[node] = best;
                    moved = true;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        (Partition::from_labels(&community).community_of, any_move)
    }

    fn aggregate(&self, labels: &[usize], count: usize) -> Level {
        let mut self_loop = vec![0.0; count];
        let mut weights: Vec<std::collections::BTreeMap<usize, f64>> =
            vec![Default::default(); count];
        for (node, nbrs) in self.adj.iter().enumerate() {
            let a = labels[node];
            self_loop[a] += self.self_loop[node];
            for &(nbr, w) in nbrs {
                if nbr < node {
                    continue;
                }
                let b = labels[nbr];
                if a == b {
                    self_loop[a] += w;
                } else {
                    *weights[a].entry(b).or_insert(0.0) += w;
                    *weights[b].entry(a).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: weights.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loop,
        }
    }
}

pub fn louvain(graph: &FactGraph, options: &LouvainOptions) -> Result<Partition> {
    Ok(louvain_with_trace(graph, options)?.partition)
}

pub fn louvain_with_trace(graph: &FactGraph, options: &LouvainOptions) -> Result<LouvainTrace> {
    let n = graph.node_count();
    let mut rng = options.seed.map(ChaCha8Rng::seed_from_u64);
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = Level::from_graph(graph);
    let mut trace = LouvainTrace {
        partition: Partition::singletons(n),
        modularity: vec![modularity(graph, &Partition::singletons(n), options.resolution)?],
        passes: Vec::new(),
    };
    loop {
        let (labels, moved) = level.local_moves(options.resolution, rng.as_mut());
        if !moved {
            break;
        }
        let count = labels.iter().copied().max().map_or(0, |c| c + 1);
        for m in membership.iter_mut() {
            *m = labels[*m];
        }
        let partition = Partition::from_labels(&membership);
        let q = modularity(graph, &partition, options.resolution)?;
        trace.modularity.push(q);
        trace.passes.push(partition.clone());
        trace.partition = partition;
        if count == level.len() {
            break;
        }
        level = level.aggregate(&labels, count);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clique_edges(nodes: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::new();
        for (i, &a) in nodes.iter().enumerate() {
            for &b in &nodes[i + 1..] {
                edges.push((a, b, 1.0));
            }
        }
        edges
    }

    #[test]
    fn edgeless_graph_stays_singletons() {
        let g = FactGraph::from_edges(4, &[]).unwrap();
        let p = louvain(&g, &LouvainOptions::default()).unwrap();
        assert_eq!(p, Partition::singletons(4));
    }

    #[test]
    fn two_triangles_split_into_components() {
        let mut edges = clique_edges(&[0, 1, 2]);
        edges.extend(clique_edges(&[3, 4, 5]));
        let g = FactGraph::from_edges(6, &edges).unwrap();
        let trace = louvain_with_trace(&g, &LouvainOptions::default()).unwrap();
        assert_eq!(trace.partition.community_of, [0, 0, 0, 1, 1, 1]);
        assert!((trace.modularity.last().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_clique_is_one_community() {
        let g = FactGraph::from_edges(5, &clique_edges(&[0, 1, 2, 3, 4])).unwrap();
        let p = louvain(&g, &LouvainOptions::default()).unwrap();
        assert_eq!(p.community_count, 1);
    }

    #[test]
    fn ring_of_cliques_needs_aggregation_and_is_monotone() {
        // Six 4-cliques joined in a ring by single light edges.
        let mut edges = Vec::new();
        for c in 0..6 {
            let base = c * 4;
            edges.extend(clique_edges(&[base, base + 1, base + 2, base + 3]));
            edges.push((base + 3, (base + 4) % 24, 0.1));
        }
        let g = FactGraph::from_edges(24, &edges).unwrap();
        let trace = louvain_with_trace(&g, &LouvainOptions::default()).unwrap();
        assert!(trace.modularity.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert_eq!(trace.partition.community_count, 6);
        for c in 0..6 {
            let ids: Vec<usize> = (0..4).map(|i| trace.partition.community_of[c * 4 + i]).collect();
            assert!(ids.iter().all(|&x| x == ids[0]));
        }
    }

    #[test]
    fn seeded_order_is_reproducible() {
        let mut edges = clique_edges(&[0, 1, 2, 3]);
        edges.extend(clique_edges(&[4, 5, 6]));
        edges.push((3, 4, 0.2));
        let g = FactGraph::from_edges(7, &edges).unwrap();
        let opts = LouvainOptions { resolution: 1.0, seed: Some(9) };
        let a = louvain(&g, &opts).unwrap();
        assert_eq!(a, louvain(&g, &opts).unwrap());
        assert_eq!(a.community_count, 2);
    }

    fn arb_graph() -> impl proptest::strategy::Strategy<Value = FactGraph> {
        use proptest::prelude::*;
        (2usize..10)
            .prop_flat_map(|n| (Just(n), prop::collection::vec(prop::option::of(0.05f64..1.0), n * (n - 1) / 2)))
            .prop_map(|(n, slots)| {
                let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
                let edges: Vec<_> = pairs.zip(slots).filter_map(|((a, b), w)| w.map(|w| (a, b, w))).collect();
                FactGraph::from_edges(n, &edges).unwrap()
            })
    }

    /// Connected component label per node, by flood fill.
    fn components(g: &FactGraph) -> Vec<usize> {
        let n = g.node_count();
        let mut comp = vec![usize::MAX; n];
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = start;
            while let Some(v) = stack.pop() {
                for &(a, b, _) in &g.edges {
                    let other = if a == v { b } else if b == v { a } else { continue };
                    if comp[other] == usize::MAX {
                        comp[other] = start;
                        stack.push(other);
                    }
                }
            }
        }
        comp
    }

    proptest::proptest! {
        #[test]
        fn trace_is_monotone_and_matches_final_partition(g in arb_graph()) {
            let trace = louvain_with_trace(&g, &LouvainOptions::default()).unwrap();
            proptest::prop_assert!(trace.modularity.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            let q = modularity(&g, &trace.partition, 1.0).unwrap();
            let last = *trace.modularity.last().unwrap();
            proptest::prop_assert!((q - last).abs() < 1e-9);
            let q_one = modularity(&g, &Partition::all_in_one(g.node_count()), 1.0).unwrap();
            proptest::prop_assert!(q >= q_one - 1e-12);
        }

        #[test]
        fn communities_never_span_components(g in arb_graph()) {
            let p = louvain(&g, &LouvainOptions::default()).unwrap();
            let comp = components(&g);
            for a in 0..g.node_count() {
                for b in a + 1..g.node_count() {
                    if p.community_of[a] == p.community_of[b] && comp[a] != comp[b] {
                        proptest::prop_assert!(false, "nodes {} and {} share a community across components", a, b);
                    }
                }
            }
        }
    }
}
