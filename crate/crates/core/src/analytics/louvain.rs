//! Louvain modularity maximisation with a seeded node visiting order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LouvainConfig {
    pub seed: u64,
    pub resolution: f64,
    /// Stop a local-moving pass once the gain falls below this.
    pub min_gain: f64,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        Self { seed: 42, resolution: 1.0, min_gain: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community id per node, numbered 0.. by decreasing size, ties broken
    /// by smallest member index.
    pub assignment: Vec<usize>,
    pub modularity: f64,
}

impl Partition {
    pub fn community_count(&self) -> usize {
        self.assignment.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self, community: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|&(_, &c)| c == community).map(|(i, _)| i).collect()
    }
}

/// Weighted modularity of an assignment. Edge weights must be
/// non-negative; a graph without edges has modularity 0.
pub fn modularity(graph: &WeightedGraph<f64>, assignment: &[usize], resolution: f64) -> f64 {
    let m: f64 = graph.edges().map(|(_, _, w)| *w).sum();
    if m <= 0.0 {
        return 0.0;
    }
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut degree: BTreeMap<usize, f64> = BTreeMap::new();
    for (a, b, &w) in graph.edges() {
        *degree.entry(assignment[a]).or_default() += w;
        *degree.entry(assignment[b]).or_default() += w;
        if assignment[a] == assignment[b] {
            *internal.entry(assignment[a]).or_default() += w;
        }
    }
    degree.iter().map(|(c, d)| internal.get(c).copied().unwrap_or(0.0) / m - resolution * (d / (2.0 * m)).powi(2)).sum()
}

struct Level {
    adjacency: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn from_graph(graph: &WeightedGraph<f64>) -> Self {
        let n = graph.node_count();
        let mut adjacency = vec![Vec::new(); n];
        for (a, b, &w) in graph.edges() {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        Self { adjacency, self_loops: vec![0.0; n] }
    }

    fn len(&self) -> usize {
        self.adjacency.len()
    }

    /// Weighted degree, counting a self-loop twice.
    fn strength(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[i]
    }

    /// Returns the community of each node and whether anything moved.
    fn local_moves(&self, config: &LouvainConfig, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let strength: Vec<f64> = (0..n).map(|i| self.strength(i)).collect();
        let m2: f64 = strength.iter().sum();
        let mut community: Vec<usize> = (0..n).collect();
        let mut total = strength.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut moved_any = false;
        if m2 <= 0.0 {
            return (community, false);
        }
        loop {
            let mut moved = false;
            for &i in &order {
                let current = community[i];
                let k = strength[i];
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for &(j, w) in &self.adjacency[i] {
                    *links.entry(community[j]).or_default() += w;
                }
                total[current] -= k;
                let gain = |c: usize, k_in: f64| k_in - config.resolution * total[c] * k / m2;
                let mut best = current;
                let mut best_gain = gain(current, links.get(&current).copied().unwrap_or(0.0));
                for (&c, &k_in) in &links {
                    let g = gain(c, k_in);
                    if g > best_gain + config.min_gain {
                        best = c;
                        best_gain = g;
                    }
                }
                total[best] += k;
                if best != current {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (community, moved_any)
    }

    fn aggregate(&self, community: &[usize]) -> (Level, Vec<usize>) {
        let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
        let dense: Vec<usize> = community
            .iter()
            .map(|&c| {
                let next = renumber.len();
                *renumber.entry(c).or_insert(next)
            })
            .collect();
        let n = renumber.len();
        let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut self_loops = vec![0.0; n];
        for i in 0..self.len() {
            self_loops[dense[i]] += self.self_loops[i];
            for &(j, w) in &self.adjacency[i] {
                let (ci, cj) = (dense[i], dense[j]);
                if ci == cj {
                    // each internal edge is seen from both ends
                    self_loops[ci] += w / 2.0;
                } else {
                    *weights[ci].entry(cj).or_default() += w;
                }
            }
        }
        let adjacency = weights.into_iter().map(|m| m.into_iter().collect()).collect();
        (Level { adjacency, self_loops }, dense)
    }
}

pub fn louvain(graph: &WeightedGraph<f64>, config: &LouvainConfig) -> Partition {
    let n = graph.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut level = Level::from_graph(graph);
    loop {
        let (community, moved) = level.local_moves(config, &mut rng);
        if !moved {
            break;
        }
        let (next, dense) = level.aggregate(&community);
        for c in assignment.iter_mut() {
            *c = dense[*c];
        }
        if next.len() == level.len() {
            break;
        }
        level = next;
    }

    let assignment = canonical(&assignment);
    let q = modularity(graph, &assignment, config.resolution);
    let singletons: Vec<usize> = (0..n).collect();
    let q_single = modularity(graph, &singletons, config.resolution);
    if q < q_single {
        return Partition { assignment: canonical(&singletons), modularity: q_single };
    }
    Partition { assignment, modularity: q }
}

fn canonical(assignment: &[usize]) -> Vec<usize> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in assignment.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let mut out = vec![0; assignment.len()];
    for (id, members) in groups.iter().enumerate() {
        for &i in members {
            out[i] = id;
        }
    }
    out
}
