//! Dataset directory layout.
//!
//! A dataset directory holds `entities.csv`, `triples.csv` and `ratings.csv`,
//! plus optional `relations.txt` (relation manifest) and `popularity.csv`
//! (movie popularity and release years, needed by the interview).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mindreader_core::dataset::{load_ratings, RatingStore};
use mindreader_core::kg::{load_graph, KnowledgeGraph, LoadOptions};
use mindreader_core::sampling::{load_popularity, Popularity};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPaths {
    pub entities: PathBuf,
    pub triples: PathBuf,
    pub relations: Option<PathBuf>,
    pub ratings: PathBuf,
    pub popularity: Option<PathBuf>,
}

impl DataPaths {
    pub fn in_dir(dir: &Path) -> DataPaths {
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        DataPaths {
            entities: dir.join("entities.csv"),
            triples: dir.join("triples.csv"),
            relations: optional("relations.txt"),
            ratings: dir.join("ratings.csv"),
            popularity: optional("popularity.csv"),
        }
    }

    /// Every file that exists or is required, for hashing into manifests.
    pub fn files(&self) -> Vec<&Path> {
        let mut v = vec![self.entities.as_path(), self.triples.as_path(), self.ratings.as_path()];
        v.extend(self.relations.as_deref());
        v.extend(self.popularity.as_deref());
        v
    }
}

pub struct Dataset {
    pub graph: Arc<KnowledgeGraph>,
    pub ratings: RatingStore,
    pub popularity: Option<Popularity>,
}

impl Dataset {
    pub fn popularity(&self) -> Result<&Popularity> {
        self.popularity
            .as_ref()
            .ok_or_else(|| CliError::Input("this command needs popularity.csv in the dataset".into()))
    }
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{}: no such file", path.display())))
    }
}

pub fn load_kg(paths: &DataPaths, prune: bool) -> Result<KnowledgeGraph> {
    require(&paths.entities)?;
    require(&paths.triples)?;
    if let Some(r) = &paths.relations {
        require(r)?;
    }
    let options = LoadOptions {
        prune_degree_one: prune,
        relations: paths.relations.clone(),
    };
    Ok(load_graph(&paths.entities, &paths.triples, &options)?)
}

pub fn load(paths: &DataPaths, prune: bool) -> Result<Dataset> {
    require(&paths.ratings)?;
    if let Some(p) = &paths.popularity {
        require(p)?;
    }
    let graph = Arc::new(load_kg(paths, prune)?);
    let ratings = load_ratings(&paths.ratings, &graph)?;
    let popularity = paths
        .popularity
        .as_deref()
        .map(|p| load_popularity(p, &graph))
        .transpose()?;
    Ok(Dataset {
        graph,
        ratings,
        popularity,
    })
}
