use serde::Serialize;

use crate::graph::GraphBundle;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgraphStats {
    pub kind: String,
    pub nodes: usize,
    /// Stored adjacency entries (each undirected edge counts twice).
    pub edges: usize,
    pub feature_dim: usize,
}

/// Sizes and an operation-count estimate for one forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub subgraphs: Vec<SubgraphStats>,
    pub documents: usize,
    pub hidden: usize,
    /// Σ_π E_π (d_π + d) + 2 Σ_π |V_π| d²
    pub gcn_ops: f64,
    /// 2 N² d for the document graph and the contrastive term.
    pub pairwise_ops: f64,
    pub total_ops: f64,
    pub total_ops_display: String,
}

pub fn graph_stats(bundle: &GraphBundle, n_docs: usize, hidden: usize) -> StatsReport {
    let d = hidden as f64;
    let subgraphs: Vec<SubgraphStats> = bundle
        .subgraphs()
        .map(|g| SubgraphStats {
            kind: g.kind.as_str().to_string(),
            nodes: g.num_nodes(),
            edges: g.adjacency.nnz(),
            feature_dim: g.feature_dim(),
        })
        .collect();
    let gcn_ops: f64 = subgraphs
        .iter()
        .map(|s| s.edges as f64 * (s.feature_dim as f64 + d) + 2.0 * s.nodes as f64 * d * d)
        .sum();
    let pairwise_ops = 2.0 * (n_docs as f64).powi(2) * d;
    let total_ops = gcn_ops + pairwise_ops;
    StatsReport {
        subgraphs,
        documents: n_docs,
        hidden,
        gcn_ops,
        pairwise_ops,
        total_ops,
        total_ops_display: format!("{total_ops:.3e}"),
    }
}
