//! Kruskal minimum spanning trees over angular-distance graphs.

use std::cmp::Ordering;

use crate::embedding::{angle, EmbeddingVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub weight: f64,
    /// Lower node id.
    pub lo: usize,
    pub hi: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize, weight: f64) -> Self {
        Self { weight, lo: a.min(b), hi: a.max(b) }
    }

    /// Tie-break order: (weight, lower id, higher id).
    fn order(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    pub edges: Vec<Edge>,
    pub total: f64,
}

impl SpanningTree {
    pub fn mean(&self) -> f64 {
        if self.edges.is_empty() {
            0.0
        } else {
            self.total / self.edges.len() as f64
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal over an explicit edge list on nodes `0..n`. The result is a
/// spanning forest if the edges do not connect all nodes. Edge weights are
/// summed in acceptance order.
pub fn kruskal(n: usize, mut edges: Vec<Edge>) -> SpanningTree {
    edges.sort_by(Edge::order);
    let mut ds = DisjointSet::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    let mut total = 0.0;
    for e in edges {
        if ds.union(e.lo, e.hi) {
            total += e.weight;
            tree.push(e);
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    SpanningTree { edges: tree, total }
}

/// All `n(n-1)/2` angular-distance edges of the complete graph.
pub fn complete_edges(points: &[EmbeddingVector]) -> Vec<Edge> {
    let mut edges = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            edges.push(Edge::new(i, j, angle(points[i].as_slice(), points[j].as_slice())));
        }
    }
    edges
}

pub fn mst_of_points(points: &[EmbeddingVector]) -> SpanningTree {
    kruskal(points.len(), complete_edges(points))
}

/// MST of `points ∪ {extra}` given the MST of `points`.
///
/// Every MST of the grown complete graph uses only edges of an MST of the
/// old graph plus edges incident to the new node, so Kruskal runs on
/// `2n - 1` edges instead of `n(n+1)/2`. The new node gets id `points.len()`.
pub fn mst_with_extra_point(
    points: &[EmbeddingVector],
    base: &SpanningTree,
    extra: &EmbeddingVector,
) -> SpanningTree {
    let n = points.len();
    let mut edges = base.edges.clone();
    edges.extend(
        points
            .iter()
            .enumerate()
            .map(|(i, p)| Edge::new(i, n, angle(p.as_slice(), extra.as_slice()))),
    );
    kruskal(n + 1, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let t = kruskal(3, vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 2.0), Edge::new(2, 0, 3.0)]);
        assert_eq!(t.total, 3.0);
        assert_eq!(t.edges.len(), 2);
    }

    #[test]
    fn ties_resolved_by_node_ids() {
        let t = kruskal(3, vec![Edge::new(2, 1, 1.0), Edge::new(0, 2, 1.0), Edge::new(1, 0, 1.0)]);
        assert_eq!(t.edges, vec![Edge::new(0, 1, 1.0), Edge::new(0, 2, 1.0)]);
    }

    #[test]
    fn forest_when_disconnected() {
        let t = kruskal(4, vec![Edge::new(0, 1, 1.0), Edge::new(2, 3, 2.0)]);
        assert_eq!(t.total, 3.0);
        assert_eq!(t.edges.len(), 2);
    }

    #[test]
    fn single_node_and_empty() {
        assert_eq!(kruskal(1, vec![]).total, 0.0);
        assert_eq!(kruskal(0, vec![]).edges.len(), 0);
    }
}
