//! PageRank by power iteration over a row-stochastic transition graph.
//!
//! Dangling nodes spread their mass uniformly over all nodes. The teleport
//! vector is uniform for global PageRank and uniform over the seed set for the
//! personalized variant.

use serde::{Deserialize, Serialize};

use super::{EntityId, KnowledgeGraph};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tol: 1e-8,
            max_iters: 200,
        }
    }
}

impl PageRankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must be in (0, 1), got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(
                "tol must be positive and max_iters at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRankScores {
    pub damping: f64,
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iters` was hit before the L1 change fell below `tol`.
    pub converged: bool,
}

impl PageRankScores {
    #[inline]
    pub fn get(&self, id: EntityId) -> f64 {
        self.scores.get(id.index()).copied().unwrap_or(0.0)
    }
}

/// Incoming-edge CSR with transition probabilities, so one sweep is a pull
/// over each node's in-neighbours.
#[derive(Clone, Debug)]
pub struct TransitionGraph {
    n: usize,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
    in_probs: Vec<f64>,
    dangling: Vec<u32>,
}

impl TransitionGraph {
    /// Directed weighted edges `(from, to, weight)`; weights must be positive.
    /// Parallel edges accumulate.
    pub fn from_weighted_edges(n: usize, edges: &[(u32, u32, f64)]) -> Self {
        let mut out_weight = vec![0.0f64; n];
        let mut in_count = vec![0usize; n + 1];
        for &(u, v, w) in edges {
            debug_assert!(w > 0.0);
            out_weight[u as usize] += w;
            in_count[v as usize + 1] += 1;
        }
        for i in 0..n {
            in_count[i + 1] += in_count[i];
        }
        let in_offsets = in_count.clone();
        let mut cursor = in_count;
        let mut in_sources = vec![0u32; edges.len()];
        let mut in_probs = vec![0.0f64; edges.len()];
        for &(u, v, w) in edges {
            let slot = cursor[v as usize];
            cursor[v as usize] += 1;
            in_sources[slot] = u;
            in_probs[slot] = w / out_weight[u as usize];
        }
        let dangling = (0..n as u32)
            .filter(|&i| out_weight[i as usize] == 0.0)
            .collect();
        TransitionGraph {
            n,
            in_offsets,
            in_sources,
            in_probs,
            dangling,
        }
    }

    /// Undirected edges with unit weight, each pair listed once.
    pub fn undirected(n: usize, pairs: &[(u32, u32)]) -> Self {
        let mut edges = Vec::with_capacity(pairs.len() * 2);
        for &(a, b) in pairs {
            edges.push((a, b, 1.0));
            if a != b {
                edges.push((b, a, 1.0));
            }
        }
        Self::from_weighted_edges(n, &edges)
    }

    /// One transition per typed edge of the graph, following edge direction.
    pub fn directed(graph: &KnowledgeGraph) -> Self {
        let edges: Vec<(u32, u32, f64)> = graph
            .edges()
            .iter()
            .map(|e| (e.head.0, e.tail.0, 1.0))
            .collect();
        Self::from_weighted_edges(graph.len(), &edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Dense row-stochastic transition matrix (dangling rows uniform). Intended
    /// for small graphs in tests and diagnostics.
    pub fn dense_transitions(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut m = vec![vec![0.0; n]; n];
        for v in 0..n {
            for k in self.in_offsets[v]..self.in_offsets[v + 1] {
                m[self.in_sources[k] as usize][v] += self.in_probs[k];
            }
        }
        for &d in &self.dangling {
            m[d as usize].iter_mut().for_each(|x| *x = 1.0 / n as f64);
        }
        m
    }

    fn iterate(&self, teleport: &[f64], cfg: &PageRankConfig) -> PageRankScores {
        let n = self.n;
        let d = cfg.damping;
        let mut x = teleport.to_vec();
        let mut next = vec![0.0; n];
        let mut iterations = 0;
        let mut converged = false;
        const CHUNK: usize = 4096;

        while iterations < cfg.max_iters {
            iterations += 1;
            let dangling_mass: f64 = self.dangling.iter().map(|&i| x[i as usize]).sum();
            let spread = d * dangling_mass / n as f64;
            let prev = &x;
            par::for_each_chunk_mut(&mut next, CHUNK, |chunk_idx, out| {
                let base = chunk_idx * CHUNK;
                for (off, slot) in out.iter_mut().enumerate() {
                    let v = base + off;
                    let mut acc = 0.0;
                    for k in self.in_offsets[v]..self.in_offsets[v + 1] {
                        acc += self.in_probs[k] * prev[self.in_sources[k] as usize];
                    }
                    *slot = (1.0 - d) * teleport[v] + d * acc + spread;
                }
            });
            let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut x, &mut next);
            if delta < cfg.tol {
                converged = true;
                break;
            }
        }

        let total: f64 = x.iter().sum();
        if total > 0.0 {
            x.iter_mut().for_each(|v| *v /= total);
        }
        if !converged {
            log::warn!("PageRank did not converge within {} iterations", cfg.max_iters);
        }
        PageRankScores {
            damping: d,
            scores: x,
            iterations,
            converged,
        }
    }
}

/// Global PageRank over the directed typed edges with uniform teleport.
pub fn global_pagerank(graph: &KnowledgeGraph, cfg: &PageRankConfig) -> Result<PageRankScores> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    cfg.validate()?;
    let view = TransitionGraph::directed(graph);
    let n = view.n;
    Ok(view.iterate(&vec![1.0 / n as f64; n], cfg))
}

/// PageRank with teleport restricted uniformly to `seeds` (node indices of `view`).
pub fn personalized_pagerank(
    view: &TransitionGraph,
    seeds: &[u32],
    cfg: &PageRankConfig,
) -> Result<PageRankScores> {
    if seeds.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    cfg.validate()?;
    let mut teleport = vec![0.0; view.n];
    let mut uniq = seeds.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    for &s in &uniq {
        if s as usize >= view.n {
            return Err(Error::UnknownEntity(s));
        }
        teleport[s as usize] = 1.0 / uniq.len() as f64;
    }
    Ok(view.iterate(&teleport, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityKind;

    fn chain(n: usize, edges: &[(u32, u32)]) -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        for i in 0..n {
            b.entity(&format!("n{i}"), "", EntityKind::Genre).unwrap();
        }
        for &(h, t) in edges {
            b.edge(EntityId(h), "R", EntityId(t)).unwrap();
        }
        b.build(false).unwrap()
    }

    #[test]
    fn symmetric_pair_is_uniform() {
        let g = chain(2, &[(0, 1), (1, 0)]);
        let pr = global_pagerank(&g, &PageRankConfig::default()).unwrap();
        assert!(pr.converged);
        assert!((pr.scores[0] - 0.5).abs() < 1e-12);
        assert!((pr.scores[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_node() {
        let g = chain(1, &[]);
        let pr = global_pagerank(&g, &PageRankConfig::default()).unwrap();
        assert_eq!(pr.scores, vec![1.0]);
    }

    #[test]
    fn all_seeds_equal_global() {
        let g = chain(2, &[(0, 1), (1, 0)]);
        let cfg = PageRankConfig::default();
        let global = global_pagerank(&g, &cfg).unwrap();
        let ppr = personalized_pagerank(&TransitionGraph::directed(&g), &[0, 1], &cfg).unwrap();
        for (a, b) in global.scores.iter().zip(&ppr.scores) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn seed_errors() {
        let g = chain(2, &[(0, 1)]);
        let view = TransitionGraph::directed(&g);
        let cfg = PageRankConfig::default();
        assert!(matches!(personalized_pagerank(&view, &[], &cfg), Err(Error::EmptySeedSet)));
        assert!(matches!(
            personalized_pagerank(&view, &[7], &cfg),
            Err(Error::UnknownEntity(7))
        ));
        let bad = PageRankConfig {
            damping: 1.0,
            ..cfg
        };
        assert!(personalized_pagerank(&view, &[0], &bad).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let g = chain(3, &[(0, 1), (1, 2)]);
        let cfg = PageRankConfig {
            max_iters: 1,
            tol: 1e-15,
            ..Default::default()
        };
        let pr = global_pagerank(&g, &cfg).unwrap();
        assert!(!pr.converged);
        assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
