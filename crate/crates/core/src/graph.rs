//! Unweighted undirected graph with the centralities shared by the
//! co-occurrence and topic-term networks.

use std::collections::VecDeque;

use rayon::prelude::*;

/// Adjacency lists over nodes `0..n`; neighbours sorted, no duplicates,
/// no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adjacency: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    /// Duplicate edges collapse to one; self-loops are dropped.
    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) outside 0..{n}");
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self { adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Hop counts from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let next = dist[u].map(|d| d + 1);
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = next;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Closeness of every node. With `r` nodes reachable from `v` at total
    /// distance `S`, closeness is `(r / S) * (r / (n - 1))`: the classic
    /// `(n-1)/S` inside a connected graph, scaled down by the share of the
    /// graph that `v` can reach. Isolated nodes score 0.
    pub fn closeness(&self) -> Vec<f64> {
        let n = self.node_count();
        if n < 2 {
            return vec![0.0; n];
        }
        (0..n)
            .into_par_iter()
            .map(|v| {
                let (reached, total) = self
                    .bfs_distances(v)
                    .iter()
                    .flatten()
                    .filter(|&&d| d > 0)
                    .fold((0u64, 0u64), |(r, s), &d| (r + 1, s + d as u64));
                if total == 0 {
                    0.0
                } else {
                    let r = reached as f64;
                    (r / total as f64) * (r / (n - 1) as f64)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_star() {
        let path = UndirectedGraph::from_edges(3, [(0, 1), (1, 2)]);
        let c = path.closeness();
        assert_eq!(c[1], 1.0);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);

        let star = UndirectedGraph::from_edges(5, (1..5).map(|i| (0, i)));
        assert_eq!(star.closeness()[0], 1.0);
    }

    #[test]
    fn duplicates_and_loops_collapse() {
        let g = UndirectedGraph::from_edges(3, [(0, 1), (1, 0), (0, 1), (2, 2)]);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(2), 0);
        assert_eq!(g.closeness()[2], 0.0);
    }

    #[test]
    fn disconnected_scaling() {
        // two disjoint edges: each node reaches 1 of 3 others at distance 1
        let g = UndirectedGraph::from_edges(4, [(0, 1), (2, 3)]);
        for c in g.closeness() {
            assert!((c - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
