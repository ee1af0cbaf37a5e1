//! Data-parallel core against a single-thread pool on the synthetic dataset.
//!
//! With `--no-default-features` both arms run the sequential code path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mindreader_core::eval::{build_loo, evaluate, LooConfig};
use mindreader_core::kg::{global_pagerank, PageRankConfig};
use mindreader_core::models::{ItemKnn, MfConfig, MfModel};
use mindreader_core::synth::{generate, SynthConfig};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1-thread", one), ("default", all)]
}

fn bench(c: &mut Criterion) {
    let data = generate(&SynthConfig::default()).unwrap();
    let graph = &*data.graph;
    let binary = data.ratings.to_binary();
    let split = build_loo(&binary, graph, &LooConfig::default(), 1).unwrap();
    let knn = ItemKnn::fit(&split.train, 50);
    let mf_cfg = MfConfig {
        epochs: 5,
        ..Default::default()
    };

    let mut group = c.benchmark_group("parallel");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_with_input(BenchmarkId::new("pagerank", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| global_pagerank(graph, &PageRankConfig::default()).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("als", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| MfModel::fit(&split.train, graph.len(), &mf_cfg, 1).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("loo_eval", label), &pool, |b, pool| {
            b.iter(|| pool.install(|| evaluate(&knn, graph, &split, 10).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
