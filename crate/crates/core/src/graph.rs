//! Undirected, positively weighted interaction graphs.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Node count, the undirected edge list and per-node incidence.
///
/// Edges are stored once with `i < j`; edge order is the order given at
/// construction and every per-edge vector in the crate is aligned with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphTopology {
    n: usize,
    pairs: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
}

impl GraphTopology {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut incident = vec![Vec::new(); n];
        for (a, b) in pairs {
            if a == b {
                return Err(Error::domain(format!("self-loop at node {a}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n {
                return Err(Error::domain(format!("edge ({i}, {j}) references a node >= {n}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::domain(format!("duplicate edge ({i}, {j})")));
            }
            let e = out.len();
            incident[i].push(e);
            incident[j].push(e);
            out.push((i, j));
        }
        Ok(Self {
            n,
            pairs: out,
            incident,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Indices of the edges touching `node`.
    pub fn incident(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.incident[node].len()
    }

    /// The endpoint of edge `e` that is not `node`.
    pub fn other(&self, e: usize, node: usize) -> usize {
        let (i, j) = self.pairs[e];
        if i == node {
            j
        } else {
            i
        }
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        self.incident
            .get(i)?
            .iter()
            .copied()
            .find(|&e| self.pairs[e] == (i, j))
    }

    /// Connectivity by breadth-first search.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &e in &self.incident[u] {
                let v = self.other(e, u);
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// A topology plus one strictly positive weight per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    topology: Arc<GraphTopology>,
    weights: Vec<f64>,
}

impl WeightedGraph {
    /// Builds a graph from `(i, j, w)` triples.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let topo = GraphTopology::new(n, edges.iter().map(|&(i, j, _)| (i, j)))?;
        let weights = edges.iter().map(|e| e.2).collect();
        Self::new(Arc::new(topo), weights)
    }

    pub fn new(topology: Arc<GraphTopology>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != topology.num_edges() {
            return Err(Error::Shape(format!(
                "{} weights for {} edges",
                weights.len(),
                topology.num_edges()
            )));
        }
        if let Some((e, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            let (i, j) = topology.pairs()[e];
            return Err(Error::domain(format!(
                "edge ({i}, {j}) has non-positive or non-finite weight {w}"
            )));
        }
        Ok(Self { topology, weights })
    }

    pub fn topology(&self) -> &Arc<GraphTopology> {
        &self.topology
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.topology.num_edges()
    }

    /// `(i, j, w)` triples in edge order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.topology
            .pairs()
            .iter()
            .zip(&self.weights)
            .map(|(&(i, j), &w)| (i, j, w))
    }

    /// Same topology, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.topology), weights)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.with_weights(self.weights.iter().map(|w| w * c).collect())
    }

    /// Weighted degree of every node.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.num_nodes()];
        for (i, j, w) in self.edges() {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    /// Relabels nodes: node `v` becomes `perm[v]`. Edge order is preserved.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes() {
            return Err(Error::Shape("permutation length differs from node count".into()));
        }
        let edges: Vec<_> = self
            .edges()
            .map(|(i, j, w)| (perm[i], perm[j], w))
            .collect();
        Self::from_edges(self.num_nodes(), &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_edges() {
        assert!(WeightedGraph::from_edges(3, &[(0, 0, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(3, &[(0, 3, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(WeightedGraph::from_edges(3, &[(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::from_edges(3, &[(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::from_edges(3, &[(0, 1, f64::NAN)]).is_err());
    }

    #[test]
    fn normalizes_edge_orientation() {
        let g = WeightedGraph::from_edges(3, &[(2, 0, 1.5)]).unwrap();
        assert_eq!(g.topology().pairs(), &[(0, 2)]);
        assert_eq!(g.topology().edge_index(2, 0), Some(0));
        assert_eq!(g.topology().edge_index(1, 0), None);
    }

    #[test]
    fn connectivity() {
        let path = GraphTopology::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(path.is_connected());
        let split = GraphTopology::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
    }
}
