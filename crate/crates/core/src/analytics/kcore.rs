//! Core decomposition by bucket peeling, O(V + E).

use std::collections::BTreeSet;

use super::graph::WeightedGraph;

/// Core number of every node, indexed like the graph. Edge weights are
/// ignored; a node's degree is its count of distinct neighbours.
pub fn core_numbers<E>(graph: &WeightedGraph<E>) -> Vec<usize> {
    let n = graph.node_count();
    let mut degree: Vec<usize> = (0..n).map(|i| graph.degree(i)).collect();
    let max_degree = degree.iter().copied().max().unwrap_or(0);

    // vertices sorted by degree, with bin[d] = first position of degree d
    let mut bin = vec![0usize; max_degree + 1];
    for &d in &degree {
        bin[d] += 1;
    }
    let mut start = 0;
    for slot in bin.iter_mut() {
        let count = *slot;
        *slot = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[degree[v]];
        vert[pos[v]] = v;
        bin[degree[v]] += 1;
    }
    for d in (1..=max_degree).rev() {
        bin[d] = bin[d - 1];
    }
    if !bin.is_empty() {
        bin[0] = 0;
    }

    for i in 0..n {
        let v = vert[i];
        for u in graph.neighbors(v) {
            if degree[u] > degree[v] {
                let du = degree[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du] += 1;
                degree[u] -= 1;
            }
        }
    }
    degree
}

/// Nodes whose core number is at least `k`.
pub fn k_core_nodes<E>(graph: &WeightedGraph<E>, k: usize) -> BTreeSet<usize> {
    core_numbers(graph).into_iter().enumerate().filter(|&(_, c)| c >= k).map(|(i, _)| i).collect()
}

pub fn k_core<E: Clone>(graph: &WeightedGraph<E>, k: usize) -> WeightedGraph<E> {
    graph.induced_subgraph(&k_core_nodes(graph, k))
}

/// The non-empty core of largest `k`, with that `k`. `None` for a graph
/// without nodes.
pub fn max_k_core<E: Clone>(graph: &WeightedGraph<E>) -> Option<(usize, WeightedGraph<E>)> {
    let k = core_numbers(graph).into_iter().max()?;
    Some((k, k_core(graph, k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_with_tail() {
        let g =
            WeightedGraph::from_weighted_edges([("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0), ("c", "d", 1.0)]);
        assert_eq!(core_numbers(&g), vec![2, 2, 2, 1]);
        let (k, core) = max_k_core(&g).unwrap();
        assert_eq!(k, 2);
        assert_eq!(core.node_count(), 3);
    }

    #[test]
    fn isolated_nodes_are_zero_core() {
        let mut g: WeightedGraph<f64> = WeightedGraph::new();
        g.add_node("x");
        g.add_node("y");
        assert_eq!(core_numbers(&g), vec![0, 0]);
        assert!(max_k_core(&WeightedGraph::<f64>::new()).is_none());
    }
}
