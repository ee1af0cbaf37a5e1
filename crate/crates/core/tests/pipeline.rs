//! End-to-end runs on the small synthetic dataset.

use std::path::Path;

use mindreader_core::dataset::load_ratings;
use mindreader_core::eval::{run_experiment, ExperimentPlan, LooConfig};
use mindreader_core::kg::{load_graph, LoadOptions};
use mindreader_core::models::{GraphMode, ModelSpec};
use mindreader_core::sampling::load_popularity;
use mindreader_core::synth::{generate, SynthConfig};

const GOLDEN: &str = "tests/golden/small_experiment.tsv";

fn plan() -> ExperimentPlan {
    ExperimentPlan {
        loo: LooConfig {
            negatives: 40,
            ..Default::default()
        },
        ..ExperimentPlan::adding(vec![1, 2, 3])
    }
}

fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::TopPop {},
        ModelSpec::ItemKnn { k: 20 },
        ModelSpec::Ppr {
            mode: GraphMode::Joint,
            pagerank: Default::default(),
        },
        ModelSpec::from_name("MF").unwrap(),
        ModelSpec::from_name("TransE-KG").unwrap(),
    ]
}

#[test]
fn files_round_trip() {
    let data = generate(&SynthConfig::small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    data.write(dir.path()).unwrap();
    let graph = load_graph(
        &dir.path().join("entities.csv"),
        &dir.path().join("triples.csv"),
        &LoadOptions::default(),
    )
    .unwrap();
    assert_eq!(graph.len(), data.graph.len());
    assert_eq!(graph.edges(), data.graph.edges());
    assert_eq!(graph.relations(), data.graph.relations());
    let ratings = load_ratings(&dir.path().join("ratings.csv"), &graph).unwrap();
    assert_eq!(ratings.ratings(), data.ratings.ratings());
    let pop = load_popularity(&dir.path().join("popularity.csv"), &graph).unwrap();
    assert_eq!(pop.len(), data.popularity.len());
}

/// The golden table pins results across thread counts and the `parallel`
/// feature. Set `MINDREADER_BLESS=1` to rewrite it.
#[test]
fn experiment_is_deterministic() {
    let data = generate(&SynthConfig::small()).unwrap();
    let binary = data.ratings.to_binary();
    let a = run_experiment(&plan(), &models(), &binary, &data.graph).unwrap();
    let b = run_experiment(&plan(), &models(), &binary, &data.graph).unwrap();
    let tsv = a.to_tsv();
    assert_eq!(tsv, b.to_tsv());
    assert!(a.cells.iter().flatten().all(|c| c.failures().is_empty()));

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os("MINDREADER_BLESS").is_some() {
        std::fs::write(&path, &tsv).unwrap();
    }
    assert_eq!(tsv, std::fs::read_to_string(&path).unwrap());
}
