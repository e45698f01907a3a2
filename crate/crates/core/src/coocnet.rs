//! Term co-occurrence network: the document-term matrix read as an
//! affiliation matrix and projected onto terms.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtm::DocumentTermMatrix;
use crate::export::{ExportEdge, ExportError, ExportNode, GraphFormat, NetworkExport};
use crate::graph::UndirectedGraph;

/// Default pruning floor applied by the pipeline.
pub const DEFAULT_MIN_WEIGHT: u64 = 2;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("degree centrality needs at least 2 nodes, graph has {0}")]
    Degenerate(usize),
    #[error("imported network is not a valid co-occurrence graph: {0}")]
    InvalidImport(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoocMode {
    /// Number of documents containing both terms.
    #[default]
    Binary,
    /// Sum over documents of the product of the two term counts.
    Count,
}

/// Undirected weighted term graph. Each pair is stored once as
/// `(lower index, higher index)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoocGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeMap<(usize, usize), u64>,
    pub mode: CoocMode,
}

impl CoocGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, u: usize, v: usize) -> u64 {
        let key = if u < v { (u, v) } else { (v, u) };
        self.edges.get(&key).copied().unwrap_or(0)
    }

    pub fn node_index(&self, term: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == term)
    }

    /// Drop edges lighter than `min_weight`; nodes are kept.
    pub fn prune(&self, min_weight: u64) -> CoocGraph {
        CoocGraph {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(_, &w)| w >= min_weight)
                .map(|(&k, &w)| (k, w))
                .collect(),
            mode: self.mode,
        }
    }

    /// Copy without zero-degree nodes.
    pub fn without_isolated(&self) -> CoocGraph {
        let mut used = vec![false; self.nodes.len()];
        for &(u, v) in self.edges.keys() {
            used[u] = true;
            used[v] = true;
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if used[i] {
                remap[i] = nodes.len();
                nodes.push(n.clone());
            }
        }
        CoocGraph {
            nodes,
            edges: self
                .edges
                .iter()
                .map(|(&(u, v), &w)| ((remap[u], remap[v]), w))
                .collect(),
            mode: self.mode,
        }
    }

    pub fn topology(&self) -> UndirectedGraph {
        UndirectedGraph::from_edges(self.nodes.len(), self.edges.keys().copied())
    }

    pub fn to_export(&self, table: Option<&CentralityTable>) -> NetworkExport {
        let lookup: HashMap<&str, &CentralityRow> = table
            .map(|t| t.rows.iter().map(|r| (r.node.as_str(), r)).collect())
            .unwrap_or_default();
        NetworkExport {
            nodes: self
                .nodes
                .iter()
                .map(|n| ExportNode {
                    label: n.clone(),
                    mode: None,
                    degree: lookup.get(n.as_str()).map(|r| r.degree_norm),
                    closeness: lookup.get(n.as_str()).map(|r| r.closeness_norm),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(&(u, v), &w)| ExportEdge {
                    source: u,
                    target: v,
                    weight: w as f64,
                })
                .collect(),
        }
    }

    /// Rebuild a graph from an exported network (e.g. parsed GraphML).
    pub fn from_export(net: &NetworkExport, mode: CoocMode) -> Result<CoocGraph, GraphError> {
        let mut edges = BTreeMap::new();
        for e in &net.edges {
            if e.source == e.target {
                return Err(GraphError::InvalidImport("self-loop".into()));
            }
            if e.weight < 1.0 || e.weight.fract() != 0.0 {
                return Err(GraphError::InvalidImport(format!(
                    "weight {} is not a positive integer",
                    e.weight
                )));
            }
            let key = (e.source.min(e.target), e.source.max(e.target));
            if edges.insert(key, e.weight as u64).is_some() {
                return Err(GraphError::InvalidImport("duplicate edge".into()));
            }
        }
        Ok(CoocGraph {
            nodes: net.nodes.iter().map(|n| n.label.clone()).collect(),
            edges,
            mode,
        })
    }
}

pub fn cooccurrence(dtm: &DocumentTermMatrix, mode: CoocMode) -> CoocGraph {
    let partials: Vec<HashMap<(usize, usize), u64>> = dtm
        .rows()
        .collect::<Vec<_>>()
        .par_chunks(64)
        .map(|chunk| {
            let mut acc: HashMap<(usize, usize), u64> = HashMap::new();
            for row in chunk {
                for (i, &(u, cu)) in row.iter().enumerate() {
                    for &(v, cv) in &row[i + 1..] {
                        let w = match mode {
                            CoocMode::Binary => 1,
                            CoocMode::Count => cu as u64 * cv as u64,
                        };
                        *acc.entry((u, v)).or_default() += w;
                    }
                }
            }
            acc
        })
        .collect();
    let mut edges = BTreeMap::new();
    for part in partials {
        for (k, w) in part {
            *edges.entry(k).or_insert(0) += w;
        }
    }
    CoocGraph {
        nodes: dtm.vocabulary().to_vec(),
        edges,
        mode,
    }
}

/// `deg(v) / (n - 1)`, counting edge presence only.
pub fn degree_centrality(graph: &CoocGraph) -> Result<BTreeMap<String, f64>, GraphError> {
    let n = graph.node_count();
    if n < 2 {
        return Err(GraphError::Degenerate(n));
    }
    let topo = graph.topology();
    Ok(graph
        .nodes
        .iter()
        .enumerate()
        .map(|(v, name)| (name.clone(), topo.degree(v) as f64 / (n - 1) as f64))
        .collect())
}

/// Unweighted closeness, scaled by reachable share for disconnected graphs.
pub fn closeness_centrality(graph: &CoocGraph) -> BTreeMap<String, f64> {
    graph.nodes.iter().cloned().zip(graph.topology().closeness()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityRow {
    pub node: String,
    pub degree_norm: f64,
    pub closeness_norm: f64,
}

/// One row per node, in node order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CentralityTable {
    pub rows: Vec<CentralityRow>,
}

impl CentralityTable {
    pub fn get(&self, node: &str) -> Option<&CentralityRow> {
        self.rows.iter().find(|r| r.node == node)
    }

    /// Rows ranked by `key` descending, ties by node name.
    pub fn ranked_by(&self, key: impl Fn(&CentralityRow) -> f64) -> Vec<&CentralityRow> {
        let mut rows: Vec<&CentralityRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.node.cmp(&b.node)));
        rows
    }
}

pub fn centrality_table(graph: &CoocGraph) -> Result<CentralityTable, GraphError> {
    let degree = degree_centrality(graph)?;
    let topo = graph.topology();
    let closeness = topo.closeness();
    Ok(CentralityTable {
        rows: graph
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| CentralityRow {
                node: n.clone(),
                degree_norm: degree[n],
                closeness_norm: closeness[i],
            })
            .collect(),
    })
}

pub fn export_graph<W: Write>(
    graph: &CoocGraph,
    table: Option<&CentralityTable>,
    format: GraphFormat,
    out: W,
) -> Result<(), ExportError> {
    graph.to_export(table).write(format, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dtm(docs: &[&[&str]]) -> DocumentTermMatrix {
        let ids = (0..docs.len()).map(|i| i.to_string()).collect();
        let lists: Vec<Vec<&str>> = docs.iter().map(|d| d.to_vec()).collect();
        DocumentTermMatrix::from_token_lists(ids, &lists).unwrap()
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> CoocGraph {
        CoocGraph {
            nodes: (0..n).map(|i| format!("t{i}")).collect(),
            edges: edges.iter().map(|&(u, v)| ((u.min(v), u.max(v)), 1)).collect(),
            mode: CoocMode::Binary,
        }
    }

    #[test]
    fn binary_and_count_weights() {
        let m = dtm(&[&["a", "b"], &["a", "b"], &["a"]]);
        assert_eq!(cooccurrence(&m, CoocMode::Binary).weight(0, 1), 2);

        let m = dtm(&[&["a", "a", "b"], &["a", "b"], &["a"]]);
        let g = cooccurrence(&m, CoocMode::Count);
        // 2·1 from the first document, 1·1 from the second
        assert_eq!(g.weight(0, 1), 3);
        assert_eq!(g.weight(1, 0), g.weight(0, 1));

        let single = dtm(&[&["x", "x"], &["x"]]);
        assert_eq!(cooccurrence(&single, CoocMode::Binary).edge_count(), 0);
    }

    #[test]
    fn degree_examples() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(degree_centrality(&tri).unwrap().values().all(|&d| d == 1.0));
        let path = graph(3, &[(0, 1), (1, 2)]);
        let d = degree_centrality(&path).unwrap();
        assert_eq!((d["t0"], d["t1"], d["t2"]), (0.5, 1.0, 0.5));
        assert!(matches!(
            degree_centrality(&graph(1, &[])),
            Err(GraphError::Degenerate(1))
        ));
    }

    #[test]
    fn closeness_examples() {
        let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(closeness_centrality(&star)["t0"], 1.0);
        let path = graph(3, &[(0, 1), (1, 2)]);
        let c = closeness_centrality(&path);
        assert_eq!(c["t1"], 1.0);
        assert!((c["t0"] - 2.0 / 3.0).abs() < 1e-15);
        let lonely = graph(3, &[(0, 1)]);
        assert_eq!(closeness_centrality(&lonely)["t2"], 0.0);
    }

    #[test]
    fn degree_ignores_weights() {
        let mut g = graph(3, &[(0, 1), (1, 2)]);
        let before = degree_centrality(&g).unwrap();
        g.edges.insert((0, 1), 40);
        assert_eq!(degree_centrality(&g).unwrap(), before);
    }

    #[test]
    fn prune_and_isolated() {
        let m = dtm(&[&["a", "b", "c"], &["a", "b"], &["c", "d"]]);
        let g = cooccurrence(&m, CoocMode::Binary).prune(2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_count(), 4);
        let compact = g.without_isolated();
        assert_eq!(compact.nodes, vec!["a", "b"]);
        assert_eq!(compact.weight(0, 1), 2);
    }

    #[test]
    fn triangle_export() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let table = centrality_table(&tri).unwrap();
        let mut buf = Vec::new();
        export_graph(&tri, Some(&table), GraphFormat::EdgesCsv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let mut xml = Vec::new();
        export_graph(&tri, Some(&table), GraphFormat::GraphMl, &mut xml).unwrap();
        let back = NetworkExport::read_graphml(&xml[..]).unwrap();
        assert_eq!(back.nodes.len(), 3);
        assert_eq!(CoocGraph::from_export(&back, CoocMode::Binary).unwrap(), tri);
    }
}
