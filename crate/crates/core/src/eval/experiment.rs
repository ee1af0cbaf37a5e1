use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::ndcg_at_k;
use super::split::{build_experiment_store, build_loo, LooConfig, LooSplit, Setting};
use super::stats::{mean, paired_t_test, std_dev, TTest};
use crate::dataset::RatingStore;
use crate::kg::KnowledgeGraph;
use crate::models::{rank, ModelSpec, Recommender};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub hr: f64,
    pub ndcg: f64,
    pub users: usize,
}

/// HR@k and NDCG@k of `model` on `split`. Users the model cannot rank count
/// as misses.
pub fn evaluate(model: &dyn Recommender, graph: &KnowledgeGraph, split: &LooSplit, k: usize) -> Result<Metrics> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if split.cases.is_empty() {
        return Err(Error::EmptyUserSet);
    }
    let per_user: Vec<(bool, f64)> = par::map(&split.cases, |c| {
        let ranked = rank(model, graph, c.user, &c.candidates, k);
        (ranked.contains(&c.held_out), ndcg_at_k(&ranked, c.held_out, k))
    });
    let n = per_user.len() as f64;
    Ok(Metrics {
        hr: per_user.iter().filter(|(h, _)| *h).count() as f64 / n,
        ndcg: per_user.iter().map(|(_, g)| g).sum::<f64>() / n,
        users: per_user.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub settings: Vec<Setting>,
    /// Index into `settings` that the other columns are tested against.
    #[serde(default)]
    pub baseline: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub loo: LooConfig,
}

fn default_k() -> usize {
    10
}

impl ExperimentPlan {
    fn with(settings: Vec<Setting>, seeds: Vec<u64>) -> Self {
        ExperimentPlan {
            settings,
            baseline: 0,
            seeds,
            k: default_k(),
            loo: LooConfig::default(),
        }
    }

    /// Movies only against movies plus descriptive entities.
    pub fn adding(seeds: Vec<u64>) -> Self {
        Self::with(vec![Setting::MoviesOnly, Setting::AddAll], seeds)
    }

    /// Replacing quarters of the movie ratings with descriptive ratings.
    pub fn substituting(seeds: Vec<u64>) -> Self {
        Self::with((1..=4).rev().map(Setting::Substitute).collect(), seeds)
    }

    /// Removing three quarters of the movie ratings without replacement.
    pub fn removing(seeds: Vec<u64>) -> Self {
        Self::with(vec![Setting::Substitute(4), Setting::Remove(1)], seeds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.settings.is_empty() {
            return Err(Error::InvalidArgument("plan has no settings".into()));
        }
        if self.baseline >= self.settings.len() {
            return Err(Error::InvalidArgument("baseline index out of range".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("plan has no seeds".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        for s in &self.settings {
            s.validate()?;
        }
        Ok(())
    }
}

/// Outcome of one (model, setting) pair over every seed, in seed order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub runs: Vec<std::result::Result<Metrics, String>>,
}

impl Cell {
    pub fn successes(&self) -> impl Iterator<Item = &Metrics> {
        self.runs.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.successes().map(|m| metric.of(m)).collect()
    }

    pub fn failures(&self) -> Vec<&str> {
        self.runs.iter().filter_map(|r| r.as_ref().err().map(String::as_str)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Metric {
    Hr,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Hr, Metric::Ndcg];

    pub fn of(self, m: &Metrics) -> f64 {
        match self {
            Metric::Hr => m.hr,
            Metric::Ndcg => m.ndcg,
        }
    }

    pub fn label(self, k: usize) -> String {
        match self {
            Metric::Hr => format!("HR@{k}"),
            Metric::Ndcg => format!("NDCG@{k}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub models: Vec<String>,
    /// Indexed `[model][setting]`.
    pub cells: Vec<Vec<Cell>>,
    /// Test users per seed.
    pub test_users: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    /// Paired test against the baseline setting; `None` for the baseline
    /// itself or when fewer than two seeds succeeded on both sides.
    pub test: Option<TTest>,
}

impl ExperimentResult {
    pub fn cell(&self, model: &str, setting: Setting) -> Option<&Cell> {
        let m = self.models.iter().position(|n| n == model)?;
        let s = self.plan.settings.iter().position(|&x| x == setting)?;
        Some(&self.cells[m][s])
    }

    pub fn summary(&self, model: usize, setting: usize, metric: Metric) -> Summary {
        let cell = &self.cells[model][setting];
        let values = cell.values(metric);
        let base = self.plan.baseline;
        let test = (setting != base)
            .then(|| {
                let pairs: Vec<(f64, f64)> = cell
                    .runs
                    .iter()
                    .zip(&self.cells[model][base].runs)
                    .filter_map(|(a, b)| Some((metric.of(a.as_ref().ok()?), metric.of(b.as_ref().ok()?))))
                    .collect();
                let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                paired_t_test(&a, &b).ok()
            })
            .flatten();
        Summary {
            mean: mean(&values),
            std: std_dev(&values),
            runs: values.len(),
            test,
        }
    }

    /// One row per (model, setting, metric), tab separated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("model\tsetting\tmetric\tmean\tstd\truns\tfailures\tt\tp\tsignificant\n");
        for (mi, model) in self.models.iter().enumerate() {
            for (si, setting) in self.plan.settings.iter().enumerate() {
                for metric in Metric::ALL {
                    let s = self.summary(mi, si, metric);
                    let (t, p, sig) = match s.test {
                        Some(t) => (format!("{:.6}", t.t), format!("{:.6}", t.p), t.significant.to_string()),
                        None => (String::new(), String::new(), String::new()),
                    };
                    let _ = writeln!(
                        out,
                        "{model}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{t}\t{p}\t{sig}",
                        setting.label(),
                        metric.label(self.plan.k),
                        s.mean,
                        s.std,
                        s.runs,
                        self.cells[mi][si].failures().len(),
                    );
                }
            }
        }
        out
    }

    /// Aligned table with `mean ± std` cells; `*` marks p < 0.05 against the
    /// baseline setting.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Model".to_string()];
        for metric in Metric::ALL {
            for s in &self.plan.settings {
                header.push(format!("{} {}", metric.label(self.plan.k), s.label()));
            }
        }
        let mut rows = vec![header];
        for (mi, model) in self.models.iter().enumerate() {
            let mut row = vec![model.clone()];
            for metric in Metric::ALL {
                for si in 0..self.plan.settings.len() {
                    let s = self.summary(mi, si, metric);
                    row.push(if s.runs == 0 {
                        "failed".into()
                    } else {
                        let star = if s.test.is_some_and(|t| t.significant) { "*" } else { "" };
                        format!("{:.2} ± {:.2}{star}", s.mean, s.std)
                    });
                }
            }
            rows.push(row);
        }
        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    let pad = widths[c] - v.chars().count();
                    if c == 0 {
                        format!("{v}{}", " ".repeat(pad))
                    } else {
                        format!("{}{v}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (cols - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        let _ = writeln!(
            out,
            "\n{} seeds, k = {}, {} negatives, top {:.0}% popular {}; splits redrawn per seed.",
            self.plan.seeds.len(),
            self.plan.k,
            self.plan.loo.negatives,
            self.plan.loo.popular_fraction * 100.0,
            if self.plan.loo.exclude_top_popular { "excluded from test" } else { "kept in test" },
        );
        out
    }
}

/// Fits and evaluates every model under every setting for every seed.
///
/// Each seed draws its own leave-one-out split; settings are applied to that
/// split's training data. Cells run in parallel and a failing cell is
/// recorded without stopping the others.
pub fn run_experiment(
    plan: &ExperimentPlan,
    models: &[ModelSpec],
    store: &RatingStore,
    graph: &KnowledgeGraph,
) -> Result<ExperimentResult> {
    plan.validate()?;
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to run".into()));
    }
    let splits: Vec<LooSplit> = par::map(&plan.seeds, |&seed| build_loo(store, graph, &plan.loo, seed))
        .into_iter()
        .collect::<Result<_>>()?;
    let stores: Vec<Vec<RatingStore>> = par::map_range(plan.seeds.len(), |i| {
        plan.settings
            .iter()
            .map(|&s| build_experiment_store(&splits[i].train, s, plan.seeds[i]))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..models.len())
        .flat_map(|m| (0..plan.settings.len()).flat_map(move |s| (0..plan.seeds.len()).map(move |r| (m, s, r))))
        .collect();
    let outcomes = par::map(&jobs, |&(m, s, r)| {
        let seed = plan.seeds[r];
        let fitted = models[m].fit(&stores[r][s], graph, seed).map_err(|e| e.to_string())?;
        evaluate(fitted.as_ref(), graph, &splits[r], plan.k).map_err(|e| e.to_string())
    });

    let mut cells: Vec<Vec<Cell>> = (0..models.len())
        .map(|_| (0..plan.settings.len()).map(|_| Cell { runs: Vec::new() }).collect())
        .collect();
    for (&(m, s, _), outcome) in jobs.iter().zip(outcomes) {
        if let Err(e) = &outcome {
            log::warn!("{} / {}: {e}", models[m].name(), plan.settings[s].label());
        }
        cells[m][s].runs.push(outcome);
    }
    Ok(ExperimentResult {
        plan: plan.clone(),
        models: models.iter().map(ModelSpec::name).collect(),
        cells,
        test_users: splits.iter().map(|s| s.cases.len()).collect(),
    })
}
