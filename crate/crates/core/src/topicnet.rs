//! Two-mode topics-terms network built from the top terms of each topic.
//!
//! Degree uses the two-mode normalization: a term's degree is divided by
//! the number of topics, a topic's by the number of term nodes. With K = 5
//! every term degree therefore lies on the grid {0.2, 0.4, 0.6, 0.8, 1.0}.
//! Closeness runs on the unweighted graph (term-topic hops count 1) with the
//! same normalization as the co-occurrence network; the topic-word
//! probabilities travel along as edge attributes only.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::export::{ExportEdge, ExportError, ExportNode, GraphFormat, NetworkExport};
use crate::graph::UndirectedGraph;
use crate::topicmodel::TermTopicMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeMode {
    Topic,
    Term,
}

impl fmt::Display for NodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeMode::Topic => "topic",
            NodeMode::Term => "term",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteEdge {
    /// Position in `topics`.
    pub topic: usize,
    /// Position in `terms`.
    pub term: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    /// Topic ids as numbered in the term-topic matrix.
    pub topics: Vec<usize>,
    /// Sorted term labels.
    pub terms: Vec<String>,
    /// Sorted by (topic, term), one edge per pair.
    pub edges: Vec<BipartiteEdge>,
}

pub fn topic_label(topic: usize) -> String {
    format!("topic {}", topic + 1)
}

impl BipartiteGraph {
    pub fn node_count(&self) -> usize {
        self.topics.len() + self.terms.len()
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    /// Topic ids adjacent to `term`, ascending.
    pub fn memberships(&self, term: &str) -> Vec<usize> {
        let Some(t) = self.term_index(term) else {
            return Vec::new();
        };
        self.edges
            .iter()
            .filter(|e| e.term == t)
            .map(|e| self.topics[e.topic])
            .collect()
    }

    pub fn term_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.terms.len()];
        for e in &self.edges {
            deg[e.term] += 1;
        }
        deg
    }

    pub fn topic_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.topics.len()];
        for e in &self.edges {
            deg[e.topic] += 1;
        }
        deg
    }

    /// Topics occupy nodes `0..K`, terms follow.
    pub fn topology(&self) -> UndirectedGraph {
        let k = self.topics.len();
        UndirectedGraph::from_edges(self.node_count(), self.edges.iter().map(|e| (e.topic, k + e.term)))
    }

    fn node_label(&self, node: usize) -> (String, NodeMode) {
        let k = self.topics.len();
        if node < k {
            (topic_label(self.topics[node]), NodeMode::Topic)
        } else {
            (self.terms[node - k].clone(), NodeMode::Term)
        }
    }

    /// Panics if any edge joins two nodes of the same mode or a term is
    /// left without a topic.
    pub fn assert_two_mode(&self) {
        let k = self.topics.len();
        let topo = self.topology();
        for u in 0..topo.node_count() {
            for &v in topo.neighbors(u) {
                assert!((u < k) != (v < k), "edge joins two nodes of the same mode");
            }
        }
        for (t, d) in self.term_degrees().into_iter().enumerate() {
            assert!(d >= 1, "term `{}` has no topic", self.terms[t]);
        }
    }

    pub fn to_export(&self, centrality: Option<&BipartiteCentrality>) -> NetworkExport {
        let lookup: HashMap<(NodeMode, &str), &BipartiteRow> = centrality
            .map(|c| c.rows.iter().map(|r| ((r.mode, r.node.as_str()), r)).collect())
            .unwrap_or_default();
        let k = self.topics.len();
        NetworkExport {
            nodes: (0..self.node_count())
                .map(|i| {
                    let (label, mode) = self.node_label(i);
                    let row = lookup.get(&(mode, label.as_str()));
                    ExportNode {
                        degree: row.map(|r| r.degree_norm),
                        closeness: row.map(|r| r.closeness_norm),
                        label,
                        mode: Some(mode.to_string()),
                    }
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| ExportEdge {
                    source: e.topic,
                    target: k + e.term,
                    weight: e.weight,
                })
                .collect(),
        }
    }
}

/// Edge `(k, v)` for every term `v` selected for topic `k`.
pub fn build_bipartite(ttm: &TermTopicMatrix) -> BipartiteGraph {
    let terms = ttm.terms();
    let position: HashMap<&str, usize> = terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut edges: Vec<BipartiteEdge> = Vec::new();
    for (ti, topic) in ttm.topics.iter().enumerate() {
        let mut row: Vec<BipartiteEdge> = topic
            .terms
            .iter()
            .map(|w| BipartiteEdge {
                topic: ti,
                term: position[w.term.as_str()],
                weight: w.weight,
            })
            .collect();
        row.sort_by_key(|e| e.term);
        row.dedup_by_key(|e| e.term);
        edges.extend(row);
    }
    let graph = BipartiteGraph {
        topics: ttm.topics.iter().map(|t| t.topic).collect(),
        terms,
        edges,
    };
    graph.assert_two_mode();
    graph
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub node: String,
    pub mode: NodeMode,
    pub value: f64,
}

/// Term: incident topics / K. Topic: incident terms / number of terms.
pub fn bipartite_degree(graph: &BipartiteGraph) -> Vec<NodeScore> {
    let k = graph.topics.len();
    let t = graph.terms.len();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let topic_deg = graph.topic_degrees();
    let term_deg = graph.term_degrees();
    graph
        .topics
        .iter()
        .zip(topic_deg)
        .map(|(&id, d)| NodeScore {
            node: topic_label(id),
            mode: NodeMode::Topic,
            value: ratio(d, t),
        })
        .chain(graph.terms.iter().zip(term_deg).map(|(term, d)| NodeScore {
            node: term.clone(),
            mode: NodeMode::Term,
            value: ratio(d, k),
        }))
        .collect()
}

/// Unweighted closeness over the whole two-mode graph, topics first.
pub fn bipartite_closeness(graph: &BipartiteGraph) -> Vec<NodeScore> {
    graph
        .topology()
        .closeness()
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let (node, mode) = graph.node_label(i);
            NodeScore { node, mode, value }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteRow {
    pub node: String,
    pub mode: NodeMode,
    pub degree_norm: f64,
    pub closeness_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BipartiteCentrality {
    pub rows: Vec<BipartiteRow>,
}

impl BipartiteCentrality {
    pub fn term(&self, term: &str) -> Option<&BipartiteRow> {
        self.rows.iter().find(|r| r.mode == NodeMode::Term && r.node == term)
    }

    /// Term rows ranked by `key` descending, ties lexicographic.
    pub fn ranked_terms(&self, key: impl Fn(&BipartiteRow) -> f64) -> Vec<&BipartiteRow> {
        let mut rows: Vec<&BipartiteRow> = self.rows.iter().filter(|r| r.mode == NodeMode::Term).collect();
        rows.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.node.cmp(&b.node)));
        rows
    }
}

pub fn bipartite_centrality(graph: &BipartiteGraph) -> BipartiteCentrality {
    let degree = bipartite_degree(graph);
    let closeness = bipartite_closeness(graph);
    BipartiteCentrality {
        rows: degree
            .into_iter()
            .zip(closeness)
            .map(|(d, c)| BipartiteRow {
                node: d.node,
                mode: d.mode,
                degree_norm: d.value,
                closeness_norm: c.value,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeTerm {
    pub term: String,
    pub topics: Vec<usize>,
}

/// Terms adjacent to at least `min_topics` topics, most-connected first.
pub fn bridge_terms(graph: &BipartiteGraph, min_topics: usize) -> Vec<BridgeTerm> {
    let mut by_term: Vec<Vec<usize>> = vec![Vec::new(); graph.terms.len()];
    for e in &graph.edges {
        by_term[e.term].push(graph.topics[e.topic]);
    }
    let mut out: Vec<BridgeTerm> = graph
        .terms
        .iter()
        .zip(by_term)
        .filter(|(_, topics)| topics.len() >= min_topics)
        .map(|(term, mut topics)| {
            topics.sort_unstable();
            BridgeTerm {
                term: term.clone(),
                topics,
            }
        })
        .collect();
    out.sort_by(|a, b| b.topics.len().cmp(&a.topics.len()).then_with(|| a.term.cmp(&b.term)));
    out
}

pub fn export_graph<W: Write>(
    graph: &BipartiteGraph,
    centrality: Option<&BipartiteCentrality>,
    format: GraphFormat,
    out: W,
) -> Result<(), ExportError> {
    graph.to_export(centrality).write(format, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ttm(lists: &[&[&str]]) -> TermTopicMatrix {
        TermTopicMatrix::from_topic_lists(
            lists
                .iter()
                .map(|l| {
                    l.iter()
                        .enumerate()
                        .map(|(i, t)| (t.to_string(), 0.5 / (i + 1) as f64))
                        .collect()
                })
                .collect(),
        )
    }

    #[test]
    fn single_topic_star() {
        let names: Vec<String> = (0..20).map(|i| format!("w{i:02}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let g = build_bipartite(&ttm(&[&refs]));
        assert_eq!((g.topics.len(), g.terms.len(), g.edges.len()), (1, 20, 20));
        let c = bipartite_centrality(&g);
        assert_eq!(c.rows[0].mode, NodeMode::Topic);
        assert_eq!(c.rows[0].closeness_norm, 1.0);
        assert_eq!(c.rows[0].degree_norm, 1.0);
        for r in &c.rows[1..] {
            assert!((r.closeness_norm - 20.0 / 39.0).abs() < 1e-15);
            assert_eq!(r.degree_norm, 1.0);
        }
    }

    #[test]
    fn disjoint_topics() {
        let g = build_bipartite(&ttm(&[&["a", "b"], &["c", "d"]]));
        assert!(g.term_degrees().iter().all(|&d| d == 1));
        assert!(bridge_terms(&g, 2).is_empty());
        assert_eq!(bridge_terms(&g, 1).len(), 4);
        let deg = bipartite_degree(&g);
        assert_eq!(deg[0].value, 0.5);
        assert_eq!(deg[2].value, 0.5);
    }

    #[test]
    fn shared_term_bridges() {
        let g = build_bipartite(&ttm(&[
            &["outbreak", "economy"],
            &["outbreak", "masks"],
            &["outbreak", "media"],
        ]));
        let bridges = bridge_terms(&g, 2);
        assert_eq!(
            bridges,
            vec![BridgeTerm {
                term: "outbreak".into(),
                topics: vec![0, 1, 2]
            }]
        );
        assert_eq!(g.memberships("outbreak"), vec![0, 1, 2]);
        let c = bipartite_centrality(&g);
        assert_eq!(c.term("outbreak").unwrap().degree_norm, 1.0);
        assert_eq!(c.ranked_terms(|r| r.closeness_norm)[0].node, "outbreak");
    }

    #[test]
    fn export_marks_modes() {
        let g = build_bipartite(&ttm(&[&["a", "b"], &["b"]]));
        let c = bipartite_centrality(&g);
        let net = g.to_export(Some(&c));
        assert_eq!(net.nodes[0].label, "topic 1");
        assert_eq!(net.nodes[0].mode.as_deref(), Some("topic"));
        assert_eq!(net.edges.len(), 3);
        let xml = net.to_string(GraphFormat::GraphMl).unwrap();
        assert_eq!(NetworkExport::read_graphml(xml.as_bytes()).unwrap(), net);
        let csv = net.to_string(GraphFormat::CentralityCsv).unwrap();
        assert!(csv.starts_with("node,mode,degree,closeness\n"));
    }

    #[test]
    fn empty_matrix_gives_empty_graph() {
        let g = build_bipartite(&TermTopicMatrix::default());
        assert_eq!(g.node_count(), 0);
        assert!(bipartite_centrality(&g).rows.is_empty());
    }
}
