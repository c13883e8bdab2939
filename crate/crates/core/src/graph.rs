//! Undirected communication graphs.
//!
//! Nodes are 0-indexed internally. The JSON form (`{"nodes": N, "edges": [[i, j], ...]}`)
//! uses 1-based indices, as do all user-facing files.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A connected, simple, undirected graph.
///
/// Edges are stored as `(min, max)` pairs sorted lexicographically; the position of an
/// edge in [`Graph::edges`] is its edge index everywhere else in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    nodes: usize,
    edges: Vec<[usize; 2]>,
}

impl Graph {
    /// Builds a graph from 0-based edge pairs, rejecting self-loops, duplicates,
    /// out-of-range indices and disconnected topologies.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidEdge(i, j, "node index out of range"));
            }
            if i == j {
                return Err(Error::InvalidEdge(i, j, "self-loop"));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidEdge(i, j, "duplicate edge"));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); node_count];
        let mut incident = vec![Vec::new(); node_count];
        for (e, &(i, j)) in edges.iter().enumerate() {
            neighbors[i].push(j);
            neighbors[j].push(i);
            incident[i].push(e);
            incident[j].push(e);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let graph = Graph {
            node_count,
            edges,
            neighbors,
            incident,
        };
        let components = graph.component_count();
        if components != 1 {
            return Err(Error::DisconnectedGraph { components });
        }
        Ok(graph)
    }

    /// Builds a graph from 1-based edge pairs, as drawn in figures and stored in files.
    pub fn from_one_based(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut zero_based = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::InvalidEdge(i, j, "1-based index must be positive"));
            }
            zero_based.push((i - 1, j - 1));
        }
        Self::new(node_count, &zero_based)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        if file.nodes > file.edges.len() + 1 {
            // cannot be connected; reject before allocating per-node storage
            return Err(Error::DisconnectedGraph {
                components: file.nodes - file.edges.len(),
            });
        }
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::from_one_based(file.nodes, &edges)
    }

    pub fn to_json_string(&self) -> String {
        let file = GraphFile {
            nodes: self.node_count,
            edges: self.edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        };
        serde_json::to_string(&file).expect("graph serialization is infallible")
    }

    /// The seven-node ring-with-chord topology used in the robot tracking example.
    pub fn seven_robot_ring() -> Self {
        Self::from_one_based(7, &[(1, 2), (2, 3), (3, 4), (1, 4), (4, 5), (5, 6), (6, 7), (1, 7)])
            .expect("static graph is valid")
    }

    pub fn path(node_count: usize) -> Result<Self> {
        let edges: Vec<_> = (1..node_count).map(|i| (i - 1, i)).collect();
        Self::new(node_count, &edges)
    }

    pub fn complete(node_count: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..node_count {
            for j in i + 1..node_count {
                edges.push((i, j));
            }
        }
        Self::new(node_count, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// Indices of the edges touching `node`, ascending.
    pub fn incident_edges(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_index(i, j).is_some()
    }

    /// Returns the graph with nodes renamed by `perm` (node `i` becomes `perm[i]`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        Self::new(self.node_count, &edges)
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.node_count];
        let mut components = 0;
        for start in 0..self.node_count {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        components
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_robot_ring_has_eight_edges() {
        let g = Graph::seven_robot_ring();
        assert_eq!(g.node_count(), 7);
        assert_eq!(g.edge_count(), 8);
        assert_eq!(g.neighbors(0), &[1, 3, 6]);
        assert_eq!(g.neighbors(6), &[0, 5]);
    }

    #[test]
    fn two_node_path() {
        let g = Graph::from_one_based(2, &[(1, 2)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn isolated_node_is_rejected() {
        let err = Graph::from_one_based(3, &[(1, 2)]).unwrap_err();
        assert!(matches!(err, Error::DisconnectedGraph { components: 2 }));
    }

    #[test]
    fn bad_edges_are_rejected() {
        assert!(matches!(
            Graph::new(3, &[(0, 0), (0, 1), (1, 2)]),
            Err(Error::InvalidEdge(0, 0, "self-loop"))
        ));
        assert!(matches!(
            Graph::new(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(Error::InvalidEdge(1, 0, "duplicate edge"))
        ));
        assert!(matches!(
            Graph::new(3, &[(0, 1), (1, 3)]),
            Err(Error::InvalidEdge(1, 3, _))
        ));
        assert!(Graph::from_one_based(2, &[(0, 1)]).is_err());
    }

    #[test]
    fn json_is_one_based() {
        let g = Graph::from_json_str(r#"{"nodes": 3, "edges": [[1, 2], [3, 2]]}"#).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let back = Graph::from_json_str(&g.to_json_string()).unwrap();
        assert_eq!(back, g);
        assert!(Graph::from_json_str(r#"{"nodes": 2, "edges": [[0, 1]]}"#).is_err());
        assert!(Graph::from_json_str(r#"{"nodes": 2}"#).is_err());
    }

    #[test]
    fn edge_lookup() {
        let g = Graph::seven_robot_ring();
        assert_eq!(g.edge_index(3, 0), Some(1));
        assert!(!g.has_edge(0, 2));
        assert_eq!(g.incident_edges(0), &[0, 1, 2]);
    }
}
