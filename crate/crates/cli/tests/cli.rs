use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use mindreader_cli::commands::replay_report;
use mindreader_cli::config::{sha256_hex, ExperimentConfig, Preset};
use mindreader_cli::data::{self, DataPaths};
use mindreader_cli::report::render_stats;
use mindreader_core::dataset::{Rating, RatingStore, Sentiment, UserId, Variant};
use mindreader_core::eval::Setting;
use mindreader_core::interview::{InterviewConfig, InterviewEngine};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mindreader"))
}

#[test]
fn fixture_stats_match_golden() {
    let ds = data::load(&DataPaths::in_dir(&fixture_dir()), false).unwrap();
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fixture_stats.txt")).unwrap();
    assert_eq!(render_stats(&ds, 10).unwrap(), golden);
}

#[test]
fn exit_codes() {
    let ok = bin().args(["stats", "--data"]).arg(fixture_dir()).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let missing = bin().args(["stats", "--data", "/definitely/not/here"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/definitely/not/here/ratings.csv"));

    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let jobs = bin().args(["--jobs", "0", "stats", "--data"]).arg(fixture_dir()).output().unwrap();
    assert_eq!(jobs.status.code(), Some(2));
    let untrainable = bin()
        .args(["--out", "/tmp/never-written", "train", "--model", "TopPop", "--data"])
        .arg(fixture_dir())
        .output()
        .unwrap();
    assert_eq!(untrainable.status.code(), Some(2));
}

#[test]
fn config_rejects_unknown_keys_and_conflicts() {
    let base = "[data]\ndir = \"x\"\n";
    assert!(ExperimentConfig::parse(base).is_ok());
    assert!(ExperimentConfig::parse(&format!("{base}colour = 1\n")).is_err());
    assert!(ExperimentConfig::parse("[data]\ndir = \"x\"\nfolder = \"y\"\n").is_err());
    assert!(ExperimentConfig::parse(&format!("{base}[plan]\nseed = [1]\n")).is_err());
    assert!(ExperimentConfig::parse(&format!("{base}[loo]\nnegative = 5\n")).is_err());
    assert!(ExperimentConfig::parse(&format!("models = [{{ model = \"MF\", dims = 3 }}]\n{base}")).is_err());

    let both = ExperimentConfig::parse(&format!("{base}[plan]\npreset = \"adding\"\nsettings = [\"add_all\"]\n")).unwrap();
    assert!(both.resolve(Path::new("/")).is_err());
    let bad_n = ExperimentConfig::parse(&format!("{base}[plan]\nsettings = [{{ substitute = 5 }}]\n")).unwrap();
    assert!(bad_n.resolve(Path::new("/")).is_err());
    let dup = ExperimentConfig::parse(&format!("models = [\"MF\", {{ model = \"MF\" }}]\n{base}")).unwrap();
    assert!(dup.resolve(Path::new("/")).is_err());
    let no_seeds = ExperimentConfig::parse(&format!("{base}[plan]\nseeds = []\n")).unwrap();
    assert!(no_seeds.resolve(Path::new("/")).is_err());
}

#[test]
fn config_resolves_paths_models_and_settings() {
    let text = r#"
models = ["TopPop", "ppr-kg", { model = "MF", dim = 4, epochs = 2 }]
output = "out"

[data]
dir = "data"
ratings = "/abs/ratings.csv"

[plan]
settings = ["movies_only", { substitute = 2 }, { remove = 1 }, "add_all"]
baseline = 1
seeds = [9]
"#;
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.plan.preset, None);
    let r = cfg.resolve(Path::new("/base")).unwrap();
    assert_eq!(r.data.entities, Path::new("/base/data/entities.csv"));
    assert_eq!(r.data.ratings, Path::new("/abs/ratings.csv"));
    assert_eq!(r.output.as_deref(), Some(Path::new("/base/out")));
    assert_eq!(
        r.plan.settings,
        [Setting::MoviesOnly, Setting::Substitute(2), Setting::Remove(1), Setting::AddAll]
    );
    assert_eq!(r.plan.baseline, 1);
    let names: Vec<String> = r.models.iter().map(|m| m.name()).collect();
    assert_eq!(names, ["TopPop", "PPR-KG", "MF"]);

    let preset = ExperimentConfig::parse("[data]\ndir = \"d\"\n[plan]\npreset = \"substituting\"\n").unwrap();
    assert_eq!(preset.plan.preset, Some(Preset::Substituting));
    let r = preset.resolve(Path::new(".")).unwrap();
    assert_eq!(r.plan.settings.len(), 4);
    assert_eq!(r.plan.seeds, [1, 2, 3, 4, 5]);
    assert_eq!(r.models.len(), 12);
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        format!(
            "models = [\"TopPop\", \"Item kNN\", \"PPR-JOINT\"]\n[data]\ndir = \"{}\"\n[plan]\nseeds = [1, 2]\n[loo]\nnegatives = 30\n",
            fixture_dir().display()
        ),
    )
    .unwrap();
    let run = |out: &Path| {
        let o = bin().arg("--out").arg(out).arg("experiment").arg(&config).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    for f in ["results.txt", "results.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(a.join("results.txt")).unwrap();
    assert!(text.contains("All movies") && text.contains("All entities"));

    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], sha256_hex(&std::fs::read(&config).unwrap()));
    assert_eq!(manifest["seeds"], serde_json::json!([1, 2]));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 6);
}

#[test]
fn single_user_with_reachable_likes_completes() {
    let ds = data::load(&DataPaths::in_dir(&fixture_dir()), false).unwrap();
    let g = &ds.graph;
    let ratings: Vec<Rating> = g
        .entities()
        .iter()
        .map(|e| Rating {
            user: UserId(0),
            entity: e.id,
            sentiment: Sentiment::Like,
            is_item: e.recommendable,
        })
        .collect();
    let store = RatingStore::new(Variant::All, Arc::new(vec!["solo".into()]), g.len(), ratings).unwrap();
    let engine = InterviewEngine::new(g.clone(), ds.popularity().unwrap(), InterviewConfig::default()).unwrap();
    let report = replay_report(&engine, &store, &[4, 5, 6]).unwrap();
    assert_eq!(report.completion_rate, 1.0);
    assert!(!report.failed_all);
    assert_eq!(report.text.lines().filter(|l| l.trim_start().starts_with(['4', '5', '6'])).count(), 3);
}

#[test]
fn train_then_evaluate_checkpoint_matches_direct_fit() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("mf.toml");
    std::fs::write(&params, "model = \"MF\"\ndim = 4\nepochs = 3\n").unwrap();
    let out = dir.path().join("mf");
    let train = bin()
        .arg("--out")
        .arg(&out)
        .args(["train", "--model", "MF", "--negatives", "30", "--params"])
        .arg(&params)
        .arg("--data")
        .arg(fixture_dir())
        .output()
        .unwrap();
    assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
    let eval = bin()
        .args(["evaluate", "--negatives", "30", "--checkpoint"])
        .arg(out.join("model.ckpt"))
        .arg("--data")
        .arg(fixture_dir())
        .output()
        .unwrap();
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));
    let line = String::from_utf8(eval.stdout).unwrap();
    assert!(line.starts_with("MF  HR@10"), "{line}");

    let wrong = bin()
        .args(["train", "--model", "BPR", "--params"])
        .arg(&params)
        .arg("--out")
        .arg(dir.path().join("x"))
        .arg("--data")
        .arg(fixture_dir())
        .output()
        .unwrap();
    assert_eq!(wrong.status.code(), Some(2));
}
