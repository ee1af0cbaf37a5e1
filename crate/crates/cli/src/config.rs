//! Experiment configuration file (TOML).
//!
//! ```toml
//! models = ["TopPop", "Item kNN", { model = "MF", dim = 16, epochs = 10 }]
//! output = "results/adding"
//!
//! [data]
//! dir = "../data/fixture"
//!
//! [plan]
//! preset = "adding"
//! seeds = [1, 2, 3, 4, 5]
//!
//! [loo]
//! negatives = 99
//! ```
//!
//! Relative paths are taken from the directory of the config file. Top-level
//! keys must precede the first table, as TOML requires.

use std::path::{Path, PathBuf};

use mindreader_core::eval::{ExperimentPlan, LooConfig, Setting};
use mindreader_core::models::ModelSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DataPaths;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model names or model tables; the twelve-model zoo when absent.
    #[serde(default)]
    pub models: Option<Vec<ModelEntry>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub data: DataSection,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub loo: LooConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Name(String),
    Spec(ModelSpec),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Dataset directory; the individual paths override its files.
    pub dir: Option<PathBuf>,
    pub entities: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub popularity: Option<PathBuf>,
    #[serde(default)]
    pub prune: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Adding,
    Substituting,
    Removing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    /// Exactly one of `preset` and `settings`; `adding` when both are absent.
    pub preset: Option<Preset>,
    pub settings: Option<Vec<Setting>>,
    pub baseline: usize,
    pub seeds: Vec<u64>,
    pub k: usize,
}

impl Default for PlanSection {
    fn default() -> Self {
        PlanSection {
            preset: None,
            settings: None,
            baseline: 0,
            seeds: vec![1, 2, 3, 4, 5],
            k: 10,
        }
    }
}

/// A parsed config with everything resolved and validated.
#[derive(Clone, Debug)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub plan: ExperimentPlan,
    pub models: Vec<ModelSpec>,
    pub data: DataPaths,
    pub prune: bool,
    pub output: Option<PathBuf>,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<ResolvedExperiment> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
        let config = Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut resolved = config.resolve(base)?;
        resolved.config_sha256 = sha256_hex(&bytes);
        Ok(resolved)
    }

    /// Validates the config and resolves relative paths against `base`.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedExperiment> {
        let at = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        let d = &self.data;
        let mut paths = match &d.dir {
            Some(dir) => DataPaths::in_dir(&at(dir)),
            None => {
                let need = |p: &Option<PathBuf>, key: &str| {
                    p.as_ref()
                        .map(at)
                        .ok_or_else(|| CliError::Input(format!("config: data.{key} is required without data.dir")))
                };
                DataPaths {
                    entities: need(&d.entities, "entities")?,
                    triples: need(&d.triples, "triples")?,
                    relations: None,
                    ratings: need(&d.ratings, "ratings")?,
                    popularity: None,
                }
            }
        };
        if let Some(p) = &d.entities {
            paths.entities = at(p);
        }
        if let Some(p) = &d.triples {
            paths.triples = at(p);
        }
        if let Some(p) = &d.ratings {
            paths.ratings = at(p);
        }
        if let Some(p) = &d.relations {
            paths.relations = Some(at(p));
        }
        if let Some(p) = &d.popularity {
            paths.popularity = Some(at(p));
        }

        let p = &self.plan;
        let base_plan = match (&p.preset, &p.settings) {
            (Some(_), Some(_)) => {
                return Err(CliError::Input("config: give plan.preset or plan.settings, not both".into()))
            }
            (None, Some(settings)) => ExperimentPlan {
                settings: settings.clone(),
                ..ExperimentPlan::adding(Vec::new())
            },
            (Some(Preset::Substituting), None) => ExperimentPlan::substituting(Vec::new()),
            (Some(Preset::Removing), None) => ExperimentPlan::removing(Vec::new()),
            (Some(Preset::Adding), None) | (None, None) => ExperimentPlan::adding(Vec::new()),
        };
        let plan = ExperimentPlan {
            baseline: p.baseline,
            seeds: p.seeds.clone(),
            k: p.k,
            loo: self.loo.clone(),
            ..base_plan
        };
        plan.validate().map_err(|e| CliError::Input(format!("config: {e}")))?;

        let models = match &self.models {
            None => ModelSpec::standard_zoo(),
            Some(entries) if entries.is_empty() => {
                return Err(CliError::Input("config: models is empty".into()))
            }
            Some(entries) => entries
                .iter()
                .map(|e| match e {
                    ModelEntry::Name(n) => ModelSpec::from_name(n).map_err(|e| CliError::Input(format!("config: {e}"))),
                    ModelEntry::Spec(s) => Ok(s.clone()),
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let mut names: Vec<String> = models.iter().map(ModelSpec::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Input(format!("config: model `{}` listed twice", w[0])));
        }

        Ok(ResolvedExperiment {
            config: self.clone(),
            plan,
            models,
            data: paths,
            prune: d.prune,
            output: self.output.as_ref().map(at),
            config_sha256: String::new(),
        })
    }
}
