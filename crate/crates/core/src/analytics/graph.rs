use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Undirected simple graph with string labels and per-edge payloads.
/// Node indices follow insertion order; edges are keyed `(lo, hi)`.
#[derive(Debug, Clone, Default)]
pub struct WeightedGraph<E> {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<BTreeSet<usize>>,
    edges: BTreeMap<(usize, usize), E>,
}

impl<E> WeightedGraph<E> {
    pub fn new() -> Self {
        Self { labels: Vec::new(), index: HashMap::new(), adjacency: Vec::new(), edges: BTreeMap::new() }
    }

    pub fn add_node(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        self.adjacency.push(BTreeSet::new());
        i
    }

    /// Returns the existing payload if the edge was already present.
    /// Self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize, payload: E) -> Option<E> {
        if a == b {
            return None;
        }
        let key = (a.min(b), a.max(b));
        self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        self.edges.insert(key, payload)
    }

    pub fn edge_mut(&mut self, a: usize, b: usize) -> Option<&mut E> {
        self.edges.get_mut(&(a.min(b), a.max(b)))
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&E> {
        self.edges.get(&(a.min(b), a.max(b)))
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &E)> {
        self.edges.iter().map(|(&(a, b), e)| (a, b, e))
    }

    /// Subgraph on `keep`, relabelled in ascending original index order.
    pub fn induced_subgraph(&self, keep: &BTreeSet<usize>) -> WeightedGraph<E>
    where
        E: Clone,
    {
        let mut sub = WeightedGraph::new();
        let mut remap = HashMap::new();
        for &i in keep {
            remap.insert(i, sub.add_node(&self.labels[i]));
        }
        for (&(a, b), e) in &self.edges {
            if let (Some(&na), Some(&nb)) = (remap.get(&a), remap.get(&b)) {
                sub.add_edge(na, nb, e.clone());
            }
        }
        sub
    }

    pub fn map_edges<F, T>(&self, mut f: F) -> WeightedGraph<T>
    where
        F: FnMut(&E) -> T,
    {
        WeightedGraph {
            labels: self.labels.clone(),
            index: self.index.clone(),
            adjacency: self.adjacency.clone(),
            edges: self.edges.iter().map(|(k, e)| (*k, f(e))).collect(),
        }
    }
}

impl WeightedGraph<f64> {
    /// Build from `(a, b, weight)` triples; repeated pairs accumulate weight.
    pub fn from_weighted_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Self {
        let mut g = WeightedGraph::new();
        for (a, b, w) in edges {
            let (ia, ib) = (g.add_node(a), g.add_node(b));
            if ia == ib {
                continue;
            }
            match g.edge_mut(ia, ib) {
                Some(existing) => *existing += w,
                None => {
                    g.add_edge(ia, ib, w);
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_are_undirected_and_loops_dropped() {
        let g = WeightedGraph::from_weighted_edges([("a", "b", 1.0), ("b", "a", 2.0), ("c", "c", 5.0)]);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edge(1, 0), Some(&3.0));
        assert_eq!(g.degree(2), 0);
    }

    #[test]
    fn induced_subgraph_keeps_internal_edges() {
        let g =
            WeightedGraph::from_weighted_edges([("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0), ("c", "d", 1.0)]);
        let sub = g.induced_subgraph(&[0, 1, 2].into_iter().collect());
        assert_eq!(sub.edge_count(), 3);
        assert_eq!(sub.node("d"), None);
    }
}
