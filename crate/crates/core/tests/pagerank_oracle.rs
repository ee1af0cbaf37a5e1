mod common;

use common::{graph_from_edges, l1, pagerank_oracle, random_edges};
use mindreader_core::kg::pagerank::{personalized_pagerank, TransitionGraph};
use mindreader_core::kg::{global_pagerank, PageRankConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight() -> PageRankConfig {
    PageRankConfig {
        tol: 1e-12,
        max_iters: 10_000,
        ..Default::default()
    }
}

#[test]
fn chain_matches_linear_solve() {
    let edges = [(0, 1), (1, 2)];
    let g = graph_from_edges(3, &edges);
    let got = global_pagerank(&g, &tight()).unwrap();
    let want = pagerank_oracle(3, &edges, 0.85, &[1.0 / 3.0; 3]);
    assert!(l1(&got.scores, &want) < 1e-9, "{:?} vs {want:?}", got.scores);
    assert!(got.converged);
}

#[test]
fn symmetric_pair_and_single_node() {
    let g = graph_from_edges(2, &[(0, 1), (1, 0)]);
    let s = global_pagerank(&g, &PageRankConfig::default()).unwrap();
    assert!((s.scores[0] - 0.5).abs() < 1e-12 && (s.scores[1] - 0.5).abs() < 1e-12);
    let g = graph_from_edges(1, &[]);
    assert_eq!(global_pagerank(&g, &PageRankConfig::default()).unwrap().scores, vec![1.0]);
}

#[test]
fn random_graphs_match_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let n = rng.random_range(2..=12);
        let edges = random_edges(&mut rng, n, 0.3);
        let damping = rng.random_range(0.5..0.95);
        let cfg = PageRankConfig { damping, ..tight() };

        let g = graph_from_edges(n, &edges);
        let got = global_pagerank(&g, &cfg).unwrap();
        let want = pagerank_oracle(n, &edges, damping, &vec![1.0 / n as f64; n]);
        assert!(l1(&got.scores, &want) <= 1e-6);

        let weighted: Vec<(u32, u32, f64)> = edges.iter().map(|&(u, v)| (u as u32, v as u32, 1.0)).collect();
        let view = TransitionGraph::from_weighted_edges(n, &weighted);
        for _ in 0..3 {
            let k = rng.random_range(1..=n);
            let seeds: Vec<u32> = rand::seq::index::sample(&mut rng, n, k).into_iter().map(|i| i as u32).collect();
            let mut t = vec![0.0; n];
            for &s in &seeds {
                t[s as usize] = 1.0 / k as f64;
            }
            let got = personalized_pagerank(&view, &seeds, &cfg).unwrap();
            let want = pagerank_oracle(n, &edges, damping, &t);
            assert!(l1(&got.scores, &want) <= 1e-6, "n={n} seeds={seeds:?}");
            let total: f64 = got.scores.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(got.scores.iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn single_seed_on_path() {
    // Undirected path 0-1-2-3, seeded at 0.
    let pairs = [(0, 1), (1, 2), (2, 3)];
    let view = TransitionGraph::undirected(4, &pairs);
    let directed: Vec<(usize, usize)> = pairs
        .iter()
        .flat_map(|&(a, b)| [(a as usize, b as usize), (b as usize, a as usize)])
        .collect();
    let got = personalized_pagerank(&view, &[0], &tight()).unwrap();
    let want = pagerank_oracle(4, &directed, 0.85, &[1.0, 0.0, 0.0, 0.0]);
    assert!(l1(&got.scores, &want) < 1e-9);
}

#[test]
fn all_seeds_equal_global() {
    let view = TransitionGraph::undirected(2, &[(0, 1)]);
    let ppr = personalized_pagerank(&view, &[0, 1], &PageRankConfig::default()).unwrap();
    let g = graph_from_edges(2, &[(0, 1), (1, 0)]);
    let global = global_pagerank(&g, &PageRankConfig::default()).unwrap();
    assert!(l1(&ppr.scores, &global.scores) < 1e-12);
    assert!(personalized_pagerank(&view, &[], &PageRankConfig::default()).is_err());
    assert!(personalized_pagerank(&view, &[5], &PageRankConfig::default()).is_err());
}
