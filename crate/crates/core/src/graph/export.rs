//! Node-link JSON export, the shape most graph plotting tools ingest directly.

use serde::{Deserialize, Serialize};

use super::{FactGraph, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    pub id: usize,
    pub text: String,
    pub community: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportLink {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// `{nodes: [{id, text, community}], links: [{source, target, weight}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLinkDocument {
    pub nodes: Vec<ExportNode>,
    pub links: Vec<ExportLink>,
}

impl NodeLinkDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Nodes sorted by id, links by `(source, target)`.
pub fn export_graph(graph: &FactGraph, partition: &Partition) -> Result<NodeLinkDocument> {
    if partition.community_of.len() != graph.node_count() {
        return Err(Error::InvalidInput(format!(
            "partition covers {} nodes, graph has {}",
            partition.community_of.len(),
            graph.node_count()
        )));
    }
    let mut nodes: Vec<ExportNode> = graph
        .nodes
        .iter()
        .map(|n| ExportNode {
            id: n.id,
            text: n.text.clone(),
            community: partition.community_of[n.id],
        })
        .collect();
    nodes.sort_by_key(|n| n.id);
    let mut links: Vec<ExportLink> = graph
        .edges
        .iter()
        .map(|&(source, target, weight)| ExportLink {
            source,
            target,
            weight,
        })
        .collect();
    links.sort_by_key(|l| (l.source, l.target));
    Ok(NodeLinkDocument { nodes, links })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::split_fragments;
    use crate::graph::{build_graph, louvain, LouvainOptions};
    use crate::providers::FixtureEmbedder;

    #[test]
    fn empty_graph_exports_empty_lists() {
        let g = FactGraph::from_edges(0, &[]).unwrap();
        let doc = export_graph(&g, &Partition::singletons(0)).unwrap();
        assert_eq!(doc.to_json().unwrap(), r#"{"nodes":[],"links":[]}"#);
    }

    #[test]
    fn single_edge_is_echoed() {
        let g = FactGraph::from_edges(2, &[(1, 0, 0.75)]).unwrap();
        let doc = export_graph(&g, &Partition::all_in_one(2)).unwrap();
        assert_eq!(doc.nodes.len(), 2);
        assert_eq!(doc.links, [ExportLink { source: 0, target: 1, weight: 0.75 }]);
    }

    #[test]
    fn export_parse_export_is_byte_identical() {
        let e = FixtureEmbedder::default();
        let frags = split_fragments(
            "Copper is ductile. Copper is very ductile. Graphene is \"strong\". Copper is not ductile.",
        );
        let g = build_graph(&frags, &e, 0.55).unwrap();
        let p = louvain(&g, &LouvainOptions::default()).unwrap();
        let first = export_graph(&g, &p).unwrap().to_json().unwrap();
        let second = NodeLinkDocument::from_json(&first).unwrap().to_json().unwrap();
        assert_eq!(first, second);
    }
}
