use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use chrono::Utc;
use mindreader_core::dataset::{RatingStore, UserId};
use mindreader_core::eval::{build_experiment_store, build_loo, evaluate, run_experiment, LooConfig, Setting};
use mindreader_core::interview::{replay_with_oracle, InterviewConfig, InterviewEngine, InterviewSession, Phase};
use mindreader_core::kg::{global_pagerank, PageRankConfig};
use mindreader_core::models::checkpoint::{Checkpoint, CheckpointModel};
use mindreader_core::models::{
    evaluate_label_propagation, BprModel, MfModel, ModelSpec, Recommender, TransKind, TransModel,
};
use mindreader_core::par;
use mindreader_core::synth::{generate, SynthConfig};
use mindreader_service::{InterviewData, Service, ServiceConfig};

use crate::config::ExperimentConfig;
use crate::data::{self, DataPaths};
use crate::manifest::{write_file, Manifest};
use crate::report::render_stats;
use crate::{Cli, CliError, Command, DataArgs, Result, SplitArgs};

pub(crate) fn dispatch(cli: Cli) -> Result<()> {
    let started = Utc::now();
    let seed = cli.seed;
    let out = cli.out.clone();
    match cli.command {
        Command::Stats { data, top } => {
            let paths = data.paths();
            let ds = data::load(&paths, data.prune)?;
            let text = render_stats(&ds, top)?;
            print!("{text}");
            if let Some(dir) = &out {
                write_file(&dir.join("stats.txt"), text.as_bytes())?;
                Manifest::new("stats", vec![], started).with_inputs(paths.files())?.write(dir)?;
            }
        }
        Command::Pagerank { data, top, damping } => {
            let paths = data.paths();
            let graph = data::load_kg(&paths, data.prune)?;
            let cfg = PageRankConfig {
                damping,
                ..Default::default()
            };
            let pr = global_pagerank(&graph, &cfg)?;
            if !pr.converged {
                log::warn!("PageRank did not converge in {} iterations", pr.iterations);
            }
            let mut order: Vec<usize> = (0..pr.scores.len()).collect();
            order.sort_by(|&a, &b| {
                pr.scores[b]
                    .total_cmp(&pr.scores[a])
                    .then_with(|| graph.entities()[a].uri.cmp(&graph.entities()[b].uri))
            });
            println!("iterations {}  converged {}", pr.iterations, pr.converged);
            for &i in order.iter().take(top) {
                let e = &graph.entities()[i];
                println!("{:.6e}  {:<8}  {}  {}", pr.scores[i], e.kind.as_str(), e.uri, e.name);
            }
            if let Some(dir) = &out {
                let mut csv = String::from("entity_uri,score\n");
                for &i in &order {
                    let _ = writeln!(csv, "{},{:.17e}", graph.entities()[i].uri, pr.scores[i]);
                }
                write_file(&dir.join("pagerank.csv"), csv.as_bytes())?;
                Manifest::new("pagerank", vec![], started).with_inputs(paths.files())?.write(dir)?;
            }
        }
        Command::Replay { data, seeds } => {
            let paths = data.paths();
            let ds = data::load(&paths, data.prune)?;
            let engine = InterviewEngine::new(ds.graph.clone(), ds.popularity()?, InterviewConfig::default())?;
            let report = replay_report(&engine, &ds.ratings, &seeds)?;
            print!("{}", report.text);
            if report.failed_all {
                return Err(CliError::Failure("every replay failed".into()));
            }
            if let Some(dir) = &out {
                write_file(&dir.join("replay.txt"), report.text.as_bytes())?;
                Manifest::new("replay", seeds, started).with_inputs(paths.files())?.write(dir)?;
            }
        }
        Command::Train {
            data,
            model,
            params,
            split,
            full,
        } => {
            let dir = out.ok_or_else(|| CliError::Input("train needs --out".into()))?;
            let paths = data.paths();
            let ds = data::load(&paths, data.prune)?;
            let spec = model_spec(&model, params.as_deref())?;
            let train = if full {
                training_store(&ds.ratings.to_binary(), &split, seed)?
            } else {
                let s = build_loo(&ds.ratings.to_binary(), &ds.graph, &loo_config(&split), seed)?;
                training_store(&s.train, &split, seed)?
            };
            let fitted = fit_checkpointable(&spec, &train, &ds.graph, seed)?;
            let ckpt = Checkpoint::new(fitted, &train, &ds.graph);
            std::fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
            ckpt.save(&dir.join("model.ckpt"))?;
            println!("{} trained on {} ratings; checkpoint {}", spec.name(), train.len(), dir.join("model.ckpt").display());
            let mut m = Manifest::new("train", vec![seed], started).with_inputs(paths.files())?;
            m.config = serde_json::to_value(&spec).ok();
            m.write(&dir)?;
        }
        Command::Evaluate {
            data,
            model,
            checkpoint,
            split,
        } => {
            let paths = data.paths();
            let ds = data::load(&paths, data.prune)?;
            let binary = ds.ratings.to_binary();
            let s = build_loo(&binary, &ds.graph, &loo_config(&split), seed)?;
            let recommender: Box<dyn Recommender> = match (&model, &checkpoint) {
                (_, Some(path)) => {
                    let ckpt = Checkpoint::load(path)?;
                    ckpt.validate_against(&ds.graph)?;
                    if ckpt.users.as_slice() != s.train.user_vocab().as_slice() {
                        return Err(CliError::Input(format!(
                            "{}: checkpoint users differ from the dataset's",
                            path.display()
                        )));
                    }
                    ckpt.into_recommender()
                }
                (Some(name), None) => {
                    let train = training_store(&s.train, &split, seed)?;
                    model_spec(name, None)?.fit(&train, &ds.graph, seed)?
                }
                (None, None) => unreachable!("clap requires --model or --checkpoint"),
            };
            let m = evaluate(recommender.as_ref(), &ds.graph, &s, split.k)?;
            let text = format!(
                "{}  HR@{k} {:.4}  NDCG@{k} {:.4}  users {}\n",
                recommender.name(),
                m.hr,
                m.ndcg,
                m.users,
                k = split.k
            );
            print!("{text}");
            if let Some(dir) = &out {
                write_file(&dir.join("evaluate.txt"), text.as_bytes())?;
                let mut files = paths.files();
                files.extend(checkpoint.as_deref());
                Manifest::new("evaluate", vec![seed], started).with_inputs(files)?.write(dir)?;
            }
        }
        Command::Experiment { config, seeds } => {
            let mut resolved = ExperimentConfig::load(&config)?;
            if let Some(s) = seeds {
                resolved.plan.seeds = s;
                resolved.plan.validate().map_err(|e| CliError::Input(e.to_string()))?;
            }
            let dir = out.or(resolved.output.clone());
            let ds = data::load(&resolved.data, resolved.prune)?;
            let binary = ds.ratings.to_binary();
            let result = run_experiment(&resolved.plan, &resolved.models, &binary, &ds.graph)?;
            let text = result.to_text();
            print!("{text}");
            let cells = result.cells.iter().flatten();
            let failures: Vec<String> = cells.flat_map(|c| c.failures()).map(str::to_string).collect();
            if let Some(dir) = &dir {
                write_file(&dir.join("results.txt"), text.as_bytes())?;
                write_file(&dir.join("results.tsv"), result.to_tsv().as_bytes())?;
                let mut m = Manifest::new("experiment", resolved.plan.seeds.clone(), started)
                    .with_inputs(resolved.data.files())?
                    .with_inputs([config.as_path()])?;
                m.config_sha256 = Some(resolved.config_sha256.clone());
                m.config = serde_json::to_value(serde_json::json!({
                    "file": resolved.config,
                    "plan": resolved.plan,
                    "models": resolved.models,
                }))
                .ok();
                m.write(dir)?;
            }
            let total = result.cells.iter().flatten().map(|c| c.runs.len()).sum::<usize>();
            if !failures.is_empty() {
                log::warn!("{} of {total} runs failed", failures.len());
            }
            if failures.len() == total {
                return Err(CliError::Failure(format!("every run failed; first error: {}", failures[0])));
            }
        }
        Command::Propagate { data, iters } => {
            let paths = data.paths();
            let ds = data::load(&paths, data.prune)?;
            let r = evaluate_label_propagation(&ds.ratings, &ds.graph, iters, seed)?;
            let mut text = String::new();
            let _ = writeln!(text, "users evaluated          {}", r.users);
            let _ = writeln!(text, "iterations               {}", r.iters);
            let _ = writeln!(text, "propagation accuracy     {:.4}", r.accuracy());
            let _ = writeln!(text, "weighted random accuracy {:.4} (expected {:.4}, like probability {:.4})",
                r.random_accuracy(), r.random_expected_accuracy, r.like_probability);
            let _ = writeln!(text, "predicted like ratio     {:.4} ({:.2} likes, {:.2} dislikes per user)",
                r.predicted_like_ratio(), r.mean_predicted_likes, r.mean_predicted_dislikes);
            let _ = writeln!(text, "\n{:<22} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1", "support");
            for (label, c) in [("propagation", &r.propagation), ("weighted random", &r.random)] {
                for (class, m) in [("like", c.positive()), ("dislike", c.negative()), ("macro", c.macro_avg()), ("weighted", c.weighted_avg())] {
                    let _ = writeln!(text, "{:<26} {:>9.4} {:>9.4} {:>9.4} {:>9}", format!("{label} {class}"), m.precision, m.recall, m.f1, m.support);
                }
            }
            print!("{text}");
            if let Some(dir) = &out {
                write_file(&dir.join("propagate.txt"), text.as_bytes())?;
                Manifest::new("propagate", vec![seed], started).with_inputs(paths.files())?.write(dir)?;
            }
        }
        Command::Serve {
            data,
            state,
            static_dir,
            addr,
        } => {
            let paths = data.paths();
            let prune = data.prune;
            let service = Service::open(ServiceConfig {
                data_dir: state,
                static_dir,
            })
            .map_err(|e| CliError::Input(e.to_string()))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failure(e.to_string()))?;
            let loader = service.clone();
            // The socket answers 503 on session routes until loading finishes.
            runtime.spawn_blocking(move || {
                let result = data::load(&paths, prune).and_then(|ds| {
                    let popularity = ds.popularity()?.clone();
                    let engine = InterviewEngine::new(ds.graph.clone(), &popularity, InterviewConfig::default())?;
                    loader
                        .install(InterviewData { engine, popularity })
                        .map_err(|e| CliError::Failure(e.to_string()))
                });
                match result {
                    Ok(()) => log::info!("interview data loaded"),
                    Err(e) => log::error!("loading interview data failed: {e}"),
                }
            });
            runtime
                .block_on(mindreader_service::serve(addr, service))
                .map_err(|e| CliError::Failure(format!("{addr}: {e}")))?;
        }
        Command::Generate { small, users, movies } => {
            let dir = out.ok_or_else(|| CliError::Input("generate needs --out".into()))?;
            let mut cfg = if small { SynthConfig::small() } else { SynthConfig::default() };
            cfg.seed = seed;
            if let Some(u) = users {
                cfg.users = u;
            }
            if let Some(m) = movies {
                cfg.movies = m;
            }
            let d = generate(&cfg)?;
            d.write(&dir)?;
            println!(
                "{} entities, {} edges, {} users, {} ratings written to {}",
                d.graph.len(),
                d.graph.edge_count(),
                d.ratings.user_count(),
                d.ratings.len(),
                dir.display()
            );
            let mut m = Manifest::new("generate", vec![seed], started);
            m.config = serde_json::to_value(&cfg).ok();
            m.write(&dir)?;
        }
    }
    Ok(())
}

fn loo_config(split: &SplitArgs) -> LooConfig {
    LooConfig {
        negatives: split.negatives,
        exclude_top_popular: !split.no_exclusion,
        ..Default::default()
    }
}

fn training_store(train: &RatingStore, split: &SplitArgs, seed: u64) -> Result<RatingStore> {
    let setting = if split.movies_only { Setting::MoviesOnly } else { Setting::AddAll };
    Ok(build_experiment_store(train, setting, seed)?)
}

fn model_spec(name: &str, params: Option<&Path>) -> Result<ModelSpec> {
    let from_name = ModelSpec::from_name(name)?;
    let Some(path) = params else { return Ok(from_name) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let spec: ModelSpec = toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if spec.name() != from_name.name() {
        return Err(CliError::Input(format!(
            "{}: describes {}, not {}",
            path.display(),
            spec.name(),
            from_name.name()
        )));
    }
    Ok(spec)
}

fn fit_checkpointable(
    spec: &ModelSpec,
    train: &RatingStore,
    graph: &mindreader_core::kg::KnowledgeGraph,
    seed: u64,
) -> Result<CheckpointModel> {
    Ok(match spec {
        ModelSpec::Mf(cfg) => CheckpointModel::Mf(MfModel::fit(train, graph.len(), cfg, seed)?),
        ModelSpec::Bpr(cfg) => CheckpointModel::Bpr(BprModel::fit(train, graph, cfg, seed)?),
        ModelSpec::TransE(cfg) => CheckpointModel::Trans(TransModel::fit(train, graph, TransKind::E, cfg, seed)?),
        ModelSpec::TransH(cfg) => CheckpointModel::Trans(TransModel::fit(train, graph, TransKind::H, cfg, seed)?),
        other => {
            return Err(CliError::Input(format!(
                "{} has no learned parameters to checkpoint; use `evaluate --model`",
                other.name()
            )))
        }
    })
}

pub struct ReplayReport {
    pub text: String,
    pub completion_rate: f64,
    pub failed_all: bool,
}

/// Interview seed for one user under a replay seed.
fn user_seed(seed: u64, user: UserId) -> u64 {
    seed ^ (u64::from(user.0) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn replay_report(engine: &InterviewEngine, store: &RatingStore, seeds: &[u64]) -> Result<ReplayReport> {
    let users: Vec<UserId> = store.users().collect();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>6} {:>6} {:>10} {:>10} {:>8} {:>8} {:>8}",
        "seed", "users", "completed", "truncated", "failed", "batches", "binary"
    );
    let mut all_completed = 0usize;
    let mut all_total = 0usize;
    let mut all_failed = 0usize;
    let mut errors: BTreeMap<String, usize> = BTreeMap::new();
    for &seed in seeds {
        let outcomes: Vec<Result<InterviewSession, String>> = par::map(&users, |&u| {
            replay_with_oracle(engine, store, u, user_seed(seed, u)).map_err(|e| e.to_string())
        });
        let ok: Vec<&InterviewSession> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        for e in outcomes.iter().filter_map(|o| o.as_ref().err()) {
            *errors.entry(e.clone()).or_insert(0) += 1;
        }
        let completed = ok
            .iter()
            .filter(|s| s.transcript.iter().any(|b| b.phase == Phase::Recommendation))
            .count();
        let truncated = ok.iter().filter(|s| s.truncated).count();
        let mean = |f: &dyn Fn(&InterviewSession) -> usize| {
            if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|s| f(s) as f64).sum::<f64>() / ok.len() as f64
            }
        };
        let _ = writeln!(
            text,
            "{:>6} {:>6} {:>10} {:>10} {:>8} {:>8.2} {:>8.2}",
            seed,
            users.len(),
            completed,
            truncated,
            outcomes.len() - ok.len(),
            mean(&|s| s.transcript.len()),
            mean(&|s| s.binary_count())
        );
        all_completed += completed;
        all_total += users.len();
        all_failed += outcomes.len() - ok.len();
    }
    let completion_rate = if all_total == 0 { 0.0 } else { all_completed as f64 / all_total as f64 };
    let _ = writeln!(
        text,
        "\ncompletion rate {:.1}% ({all_completed} of {all_total} replays reached the final lists)",
        100.0 * completion_rate
    );
    for (e, n) in &errors {
        let _ = writeln!(text, "failed {n}x: {e}");
    }
    Ok(ReplayReport {
        text,
        completion_rate,
        failed_all: all_total > 0 && all_failed == all_total,
    })
}

impl DataArgs {
    pub fn paths(&self) -> DataPaths {
        DataPaths::in_dir(&self.data)
    }
}

