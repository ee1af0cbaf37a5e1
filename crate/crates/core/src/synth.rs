//! Synthetic movie graphs and rating collections for demos, tests and
//! benchmarks.
//!
//! Users carry latent tastes over genres, people, decades and subjects. A
//! user knows a movie with a probability that grows with its popularity and
//! likes it when the summed taste of its neighbourhood plus noise is positive.
//! Ratings are collected by running each user through the interview, so the
//! data has the same shape as a real export: about thirty binary answers per
//! user plus "don't know" answers, over movies and descriptive entities.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::dataset::{Rating, RatingStore, Sentiment, UserId, Variant};
use crate::interview::{replay_with, InterviewConfig, InterviewEngine, Phase};
use crate::kg::{write_graph, EntityId, EntityKind, KnowledgeGraph};
use crate::sampling::{write_popularity, MovieMeta, Popularity};
use crate::{par, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub movies: usize,
    pub genres: usize,
    pub categories: usize,
    pub people: usize,
    pub subjects: usize,
    pub companies: usize,
    pub users: usize,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            movies: 600,
            genres: 16,
            categories: 6,
            people: 500,
            subjects: 60,
            companies: 30,
            users: 300,
            first_year: 1960,
            last_year: 2019,
        }
    }
}

impl SynthConfig {
    /// Small enough to commit and to hand-inspect.
    pub fn small() -> Self {
        SynthConfig {
            seed: 7,
            movies: 80,
            genres: 8,
            categories: 3,
            people: 60,
            subjects: 12,
            companies: 8,
            users: 24,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub graph: Arc<KnowledgeGraph>,
    pub popularity: Popularity,
    /// Answers of users who finished the interview, unknowns included.
    pub ratings: RatingStore,
    pub attempted_users: usize,
}

const RELATIONS: [&str; 8] = [
    "HAS_GENRE",
    "STARRING",
    "DIRECTED_BY",
    "PRODUCED_BY",
    "FROM_DECADE",
    "HAS_SUBJECT",
    "SUBCLASS_OF",
    "FOLLOWED_BY",
];

fn zipf_pick(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let z = Zipf::new(n as f64, 1.1).expect("n >= 1");
    (z.sample(rng) as usize).clamp(1, n) - 1
}

fn build_graph(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<(KnowledgeGraph, Vec<(String, MovieMeta)>)> {
    if cfg.movies < 10 || cfg.genres == 0 || cfg.categories == 0 || cfg.people < 2 {
        return Err(Error::InvalidArgument("synthetic graph too small".into()));
    }
    if cfg.first_year > cfg.last_year {
        return Err(Error::InvalidArgument("first_year after last_year".into()));
    }
    let mut b = KnowledgeGraph::builder();
    for r in RELATIONS {
        b.relation(r);
    }
    let make = |b: &mut crate::kg::GraphBuilder, prefix: &str, label: &str, n: usize, kind| {
        (0..n)
            .map(|i| b.entity(&format!("synth:{prefix}/{i}"), &format!("{label} {i}"), kind))
            .collect::<Result<Vec<_>>>()
    };
    let categories = make(&mut b, "category", "Category", cfg.categories, EntityKind::Category)?;
    let genres = make(&mut b, "genre", "Genre", cfg.genres, EntityKind::Genre)?;
    let subjects = make(&mut b, "subject", "Subject", cfg.subjects, EntityKind::Subject)?;
    let people = make(&mut b, "person", "Person", cfg.people, EntityKind::Person)?;
    let companies = make(&mut b, "company", "Company", cfg.companies, EntityKind::Company)?;
    let first_decade = cfg.first_year.div_euclid(10);
    let decades: Vec<EntityId> = (first_decade..=cfg.last_year.div_euclid(10))
        .map(|d| {
            let y = d * 10;
            b.entity(&format!("synth:decade/{y}s"), &format!("Movies of the {y}s"), EntityKind::Decade)
        })
        .collect::<Result<_>>()?;

    for (i, &g) in genres.iter().enumerate() {
        b.edge(g, "SUBCLASS_OF", categories[i % categories.len()])?;
    }
    for (i, &s) in subjects.iter().enumerate() {
        b.edge(s, "SUBCLASS_OF", categories[(i * 7 + 1) % categories.len()])?;
    }

    let span = (cfg.last_year - cfg.first_year) as f64;
    let mut metas = Vec::with_capacity(cfg.movies);
    let mut movies = Vec::with_capacity(cfg.movies);
    let count_dist = Normal::<f64>::new(6.0, 1.5).expect("valid");
    for i in 0..cfg.movies {
        let uri = format!("synth:movie/{i}");
        let m = b.entity(&uri, &format!("Movie {i}"), EntityKind::Movie)?;
        // Recent years are over-represented.
        let back: f64 = rng.sample::<f64, _>(StandardNormal).abs() * span / 3.0;
        let year = cfg.last_year - (back.min(span) as i32);
        b.edge(m, "FROM_DECADE", decades[(year.div_euclid(10) - first_decade) as usize])?;

        let mut picked = Vec::new();
        for _ in 0..rng.random_range(1..=3usize) {
            let g = genres[zipf_pick(rng, genres.len())];
            if !picked.contains(&g) {
                picked.push(g);
                b.edge(m, "HAS_GENRE", g)?;
            }
        }
        let mut cast = Vec::new();
        for _ in 0..rng.random_range(2..=4usize) {
            let p = people[zipf_pick(rng, people.len())];
            if !cast.contains(&p) {
                cast.push(p);
                b.edge(m, "STARRING", p)?;
            }
        }
        let director = people[zipf_pick(rng, people.len())];
        if !cast.contains(&director) {
            b.edge(m, "DIRECTED_BY", director)?;
        }
        if !companies.is_empty() {
            b.edge(m, "PRODUCED_BY", companies[zipf_pick(rng, companies.len())])?;
        }
        if !subjects.is_empty() {
            let mut topics = Vec::new();
            for _ in 0..rng.random_range(0..=2usize) {
                let s = subjects[zipf_pick(rng, subjects.len())];
                if !topics.contains(&s) {
                    topics.push(s);
                    b.edge(m, "HAS_SUBJECT", s)?;
                }
            }
        }
        if i > 0 && rng.random::<f64>() < 0.05 {
            b.edge(movies[rng.random_range(0..i)], "FOLLOWED_BY", m)?;
        }
        movies.push(m);
        let count = count_dist.sample(rng).exp().round().max(1.0) as u64;
        metas.push((
            uri,
            MovieMeta {
                entity: m,
                external_rating_count: count,
                release_year: year,
            },
        ));
    }
    let graph = b.build(true)?;
    Ok((graph, metas))
}

/// Latent tastes of one simulated user.
struct Taste {
    bias: f64,
    awareness: f64,
    /// Affinity per entity id; movies hold their own quality term.
    affinity: Vec<f64>,
}

fn noise(seed: u64, user: usize, entity: EntityId) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ee_d0f7_a57e);
    rng.set_stream(((user as u64) << 32) | entity.0 as u64);
    (rng.sample(StandardNormal), rng.random())
}

impl Taste {
    fn draw(graph: &KnowledgeGraph, quality: &[f64], rng: &mut ChaCha8Rng) -> Taste {
        let affinity = graph
            .entities()
            .iter()
            .map(|e| {
                let z: f64 = rng.sample(StandardNormal);
                match e.kind {
                    EntityKind::Movie => quality[e.id.index()],
                    EntityKind::Genre => 1.2 * z,
                    EntityKind::Person => 0.8 * z,
                    EntityKind::Decade => 0.6 * z,
                    EntityKind::Subject => 0.8 * z,
                    EntityKind::Category | EntityKind::Company => 0.3 * z,
                }
            })
            .collect();
        Taste {
            bias: 0.7 + 0.3 * rng.sample::<f64, _>(StandardNormal),
            awareness: 0.5 * rng.sample::<f64, _>(StandardNormal),
            affinity,
        }
    }

    /// Taste of an entity: its own affinity plus, for movies, the mean
    /// affinity of their descriptive neighbours.
    fn utility(&self, graph: &KnowledgeGraph, e: EntityId) -> f64 {
        let own = self.affinity[e.index()];
        match graph.kind(e) {
            EntityKind::Movie => {
                let nb: Vec<f64> = graph
                    .out_edges(e)
                    .filter(|x| graph.kind(x.tail) != EntityKind::Movie)
                    .map(|x| self.affinity[x.tail.index()])
                    .collect();
                let mean = if nb.is_empty() { 0.0 } else { nb.iter().sum::<f64>() / nb.len() as f64 };
                self.bias + own + 2.0 * mean
            }
            EntityKind::Category => {
                let nb: Vec<f64> = graph.in_edges(e).map(|x| self.affinity[x.head.index()]).collect();
                let mean = if nb.is_empty() { 0.0 } else { nb.iter().sum::<f64>() / nb.len() as f64 };
                self.bias + own + mean
            }
            _ => self.bias + own,
        }
    }

    fn knows(&self, graph: &KnowledgeGraph, pop: &Popularity, e: EntityId, u: f64) -> bool {
        let logit = match graph.kind(e) {
            EntityKind::Movie => {
                let c = pop.get(e).map_or(1, |m| m.external_rating_count) as f64;
                self.awareness + 0.9 * (c.ln() - 6.0)
            }
            EntityKind::Person | EntityKind::Company => {
                self.awareness + 0.6 * (graph.degree(e) as f64).ln() - 1.0
            }
            _ => self.awareness + 2.5,
        };
        u < 1.0 / (1.0 + (-logit).exp())
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (graph, metas) = build_graph(cfg, &mut rng)?;
    // Ids were re-densified by pruning; movies are never pruned.
    let popularity = Popularity::new(metas.into_iter().filter_map(|(uri, m)| {
        graph.lookup(&uri).map(|entity| MovieMeta { entity, ..m })
    }));
    let quality: Vec<f64> = (0..graph.len())
        .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let tastes: Vec<Taste> = (0..cfg.users).map(|_| Taste::draw(&graph, &quality, &mut rng)).collect();

    let graph = Arc::new(graph);
    let engine = InterviewEngine::new(graph.clone(), &popularity, InterviewConfig::default())?;
    let sessions = par::map_range(cfg.users, |u| {
        let taste = &tastes[u];
        let name = format!("u{u:04}");
        let session_seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ u as u64;
        replay_with(&engine, &name, &name, session_seed, |e| {
            let (eps, coin) = noise(cfg.seed, u, e);
            if !taste.knows(&graph, &popularity, e, coin) {
                Sentiment::Unknown
            } else if taste.utility(&graph, e) + 0.7 * eps >= 0.0 {
                Sentiment::Like
            } else {
                Sentiment::Dislike
            }
        })
    });

    let mut names = Vec::new();
    let mut ratings = Vec::new();
    for (u, session) in sessions.into_iter().enumerate() {
        let session = session?;
        if session.phase != Phase::Done || session.truncated {
            continue;
        }
        let user = UserId(names.len() as u32);
        names.push(format!("u{u:04}"));
        for batch in &session.transcript {
            for &(entity, sentiment) in &batch.answers {
                ratings.push(Rating {
                    user,
                    entity,
                    sentiment,
                    is_item: graph.is_recommendable(entity),
                });
            }
        }
    }
    let ratings = RatingStore::new(Variant::All, Arc::new(names), graph.len(), ratings)?;
    Ok(SynthDataset {
        graph,
        popularity,
        ratings,
        attempted_users: cfg.users,
    })
}

impl SynthDataset {
    /// Writes the graph files plus `popularity.csv` and `ratings.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_graph(&self.graph, dir)?;
        let path = dir.join("popularity.csv");
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_popularity(&self.popularity, &self.graph, std::io::BufWriter::new(f))
            .map_err(|e| Error::io(&path, e))?;
        let path = dir.join("ratings.csv");
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        crate::dataset::write_ratings(&self.ratings, &self.graph, std::io::BufWriter::new(f))
            .map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_dataset_is_deterministic_and_well_formed() {
        let cfg = SynthConfig::small();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.ratings.ratings(), b.ratings.ratings());
        assert!(a.ratings.user_count() > cfg.users / 2);
        for e in a.graph.entities() {
            assert!(a.graph.degree(e.id) >= 2);
        }
        for u in a.ratings.users() {
            let binary = a.ratings.user_ratings(u).iter().filter(|r| r.sentiment.is_binary()).count();
            assert!(binary >= 30, "user {} has {binary}", a.ratings.user_name(u));
        }
    }
}
