//! Entity selection for the rating interview.
//!
//! * movies are drawn proportionally to a popularity-times-recency weight,
//! * exploration draws neighbours of rated entities, stratified by entity kind
//!   and weighted by global PageRank,
//! * the final phase ranks movies by how many liked (or disliked) entities they
//!   touch and samples among the best by PageRank.
//!
//! All draws are without replacement.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kg::load::{csv_error, csv_reader, line_of, Columns};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph, PageRankScores};
use crate::{Error, Result};

pub const MIN_RELEASE_YEAR: i32 = 1870;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovieMeta {
    pub entity: EntityId,
    /// Number of ratings in an external catalogue, used as a popularity proxy.
    pub external_rating_count: u64,
    pub release_year: i32,
}

/// How the recency factor `max(1, age - 2000)` reads "age".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecencyRule {
    /// `age` is the release year, so the factor grows by one per year after 2000.
    #[default]
    ReleaseYear,
    /// `age` is years since release as of `reference_year`. For any real movie
    /// this makes the factor 1, i.e. pure popularity weighting.
    YearsSinceRelease { reference_year: i32 },
}

/// `external_rating_count * max(1, age - 2000)`.
pub fn movie_weight(meta: &MovieMeta, rule: RecencyRule) -> f64 {
    let age = match rule {
        RecencyRule::ReleaseYear => meta.release_year,
        RecencyRule::YearsSinceRelease { reference_year } => reference_year - meta.release_year,
    };
    meta.external_rating_count as f64 * (age - 2000).max(1) as f64
}

/// Popularity metadata for the movies of a graph.
#[derive(Clone, Debug, Default)]
pub struct Popularity {
    metas: HashMap<EntityId, MovieMeta>,
}

impl Popularity {
    pub fn new(metas: impl IntoIterator<Item = MovieMeta>) -> Self {
        Popularity {
            metas: metas.into_iter().map(|m| (m.entity, m)).collect(),
        }
    }

    pub fn get(&self, id: EntityId) -> Option<&MovieMeta> {
        self.metas.get(&id)
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    /// `(movie, weight)` for every movie of `graph`, in id order. Movies without
    /// metadata weigh 0 and are never drawn.
    pub fn weights(&self, graph: &KnowledgeGraph, rule: RecencyRule) -> Vec<(EntityId, f64)> {
        graph
            .recommendables()
            .into_iter()
            .map(|id| (id, self.get(id).map_or(0.0, |m| movie_weight(m, rule))))
            .collect()
    }
}

/// Loads `entity_uri,external_rating_count,release_year`.
pub fn load_popularity(path: &Path, graph: &KnowledgeGraph) -> Result<Popularity> {
    let max_year = chrono::Datelike::year(&chrono::Utc::now());
    let mut rdr = csv_reader(path)?;
    let cols = Columns::new(rdr.headers().map_err(|e| csv_error(path, e))?);
    let c_uri = cols.require(path, &["entity_uri", "uri"])?;
    let c_count = cols.require(path, &["external_rating_count", "rating_count"])?;
    let c_year = cols.require(path, &["release_year", "year"])?;
    let mut metas = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = line_of(&record);
        let uri = &record[c_uri];
        let entity = graph.lookup(uri).ok_or_else(|| Error::DanglingUri {
            path: path.to_path_buf(),
            line,
            uri: uri.to_string(),
        })?;
        if !graph.is_recommendable(entity) {
            return Err(Error::malformed(path, line, format!("`{uri}` is not a movie")));
        }
        let count: u64 = record[c_count]
            .parse()
            .map_err(|_| Error::malformed(path, line, "bad external_rating_count"))?;
        let year: i32 = record[c_year]
            .parse()
            .map_err(|_| Error::malformed(path, line, "bad release_year"))?;
        if !(MIN_RELEASE_YEAR..=max_year).contains(&year) {
            return Err(Error::malformed(
                path,
                line,
                format!("release_year {year} outside [{MIN_RELEASE_YEAR}, {max_year}]"),
            ));
        }
        metas.push(MovieMeta {
            entity,
            external_rating_count: count,
            release_year: year,
        });
    }
    Ok(Popularity::new(metas))
}

/// Draws up to `n` distinct ids with probability proportional to weight,
/// renormalising over the remaining pool after each draw. Zero-weight ids are
/// never drawn, so fewer than `n` come back when the positive pool is smaller.
pub fn weighted_sample<R: Rng + ?Sized>(
    pool: &[(EntityId, f64)],
    n: usize,
    rng: &mut R,
) -> Result<Vec<EntityId>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if let Some(&(id, w)) = pool.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(format!("invalid weight {w} for entity {id}")));
    }
    let mut live: Vec<(EntityId, f64)> = pool.iter().copied().filter(|&(_, w)| w > 0.0).collect();
    if live.is_empty() {
        return Err(Error::AllZeroWeights);
    }
    let mut out = Vec::with_capacity(n.min(live.len()));
    while out.len() < n && !live.is_empty() {
        let idx = draw_index(&live, rng);
        out.push(live.swap_remove(idx).0);
    }
    Ok(out)
}

fn draw_index<R: Rng + ?Sized>(items: &[(EntityId, f64)], rng: &mut R) -> usize {
    let total: f64 = items.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return rng.random_range(0..items.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &(_, w)) in items.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    // Rounding left a sliver of mass past the end; land on the last positive weight.
    items.iter().rposition(|&(_, w)| w > 0.0).unwrap_or(items.len() - 1)
}

/// Kind-stratified PageRank sampling of `adjacent`.
///
/// Groups are visited in random order, one draw per non-empty group per round,
/// each draw proportional to PageRank within its group, until `n` ids are
/// collected or every group is empty.
pub fn exploration_sample<R: Rng + ?Sized>(
    graph: &KnowledgeGraph,
    scores: &PageRankScores,
    adjacent: &[EntityId],
    n: usize,
    rng: &mut R,
) -> Vec<EntityId> {
    let mut ids = adjacent.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut by_kind: BTreeMap<EntityKind, Vec<(EntityId, f64)>> = BTreeMap::new();
    for id in ids {
        by_kind
            .entry(graph.kind(id))
            .or_default()
            .push((id, scores.get(id)));
    }
    let mut groups: Vec<Vec<(EntityId, f64)>> = by_kind.into_values().collect();
    groups.shuffle(rng);

    let mut results = Vec::with_capacity(n);
    while results.len() < n && groups.iter().any(|g| !g.is_empty()) {
        for group in groups.iter_mut() {
            if results.len() >= n {
                break;
            }
            if group.is_empty() {
                continue;
            }
            let idx = draw_index(group, rng);
            results.push(group.remove(idx).0);
        }
    }
    results
}

/// Movies adjacent to `seeds`, ranked by the number of distinct seeds they
/// touch (then PageRank, then uri), cut to `pool_size`, then `n` drawn by
/// PageRank without replacement. Entities for which `exclude` holds are skipped.
pub fn recommendation_candidates<R: Rng + ?Sized>(
    graph: &KnowledgeGraph,
    scores: &PageRankScores,
    seeds: &[EntityId],
    exclude: impl Fn(EntityId) -> bool,
    pool_size: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<EntityId>> {
    if seeds.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    let mut connections: BTreeMap<EntityId, usize> = BTreeMap::new();
    let mut uniq = seeds.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    for &s in &uniq {
        for m in graph.neighbors(s, crate::kg::Direction::Both)? {
            if graph.is_recommendable(m) && !exclude(m) {
                *connections.entry(m).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(EntityId, usize)> = connections.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| scores.get(b.0).total_cmp(&scores.get(a.0)))
            .then_with(|| graph.uri(a.0).cmp(graph.uri(b.0)))
    });
    ranked.truncate(pool_size);
    if ranked.is_empty() || n == 0 {
        return Ok(Vec::new());
    }
    let pool: Vec<(EntityId, f64)> = ranked
        .iter()
        .map(|&(id, _)| (id, scores.get(id).max(f64::MIN_POSITIVE)))
        .collect();
    weighted_sample(&pool, n, rng)
}

/// Writes `entity_uri,external_rating_count,release_year` rows in entity order.
pub fn write_popularity<W: std::io::Write>(
    popularity: &Popularity,
    graph: &KnowledgeGraph,
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity_uri", "external_rating_count", "release_year"])?;
    for e in graph.recommendables() {
        if let Some(m) = popularity.get(e) {
            w.write_record([
                graph.uri(e),
                &m.external_rating_count.to_string(),
                &m.release_year.to_string(),
            ])?;
        }
    }
    w.flush()
}
