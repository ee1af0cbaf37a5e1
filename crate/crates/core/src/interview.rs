//! The three-phase rating interview.
//!
//! A session starts in [`Phase::Initial`] with batches of popular, recent
//! movies. Once the user has liked or disliked anything it moves to
//! [`Phase::Exploration`], where batches mix neighbours of disliked entities,
//! neighbours of liked entities and neighbours of randomly drawn movies. After
//! enough binary answers the session shows guessed liked/disliked lists plus
//! random extras ([`Phase::Recommendation`]) and then ends.
//!
//! Sessions are plain values: [`InterviewEngine::submit_batch`] returns the next
//! state and leaves the input untouched when it fails. Every batch is drawn
//! from an rng keyed by the session seed and the batch number, so a session is
//! a pure function of its seed and its answers.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{RatingStore, Sentiment, UserId};
use crate::kg::{global_pagerank, EntityId, KnowledgeGraph, PageRankConfig, PageRankScores};
use crate::sampling::{
    exploration_sample, recommendation_candidates, weighted_sample, Popularity, RecencyRule,
};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterviewConfig {
    pub batch_size: usize,
    /// Entities drawn per source during exploration (three sources).
    pub slot_size: usize,
    /// Binary answers needed to leave exploration.
    pub exploration_threshold: usize,
    pub candidate_pool: usize,
    pub final_list_size: usize,
    pub extras_size: usize,
    pub recency: RecencyRule,
    pub pagerank: PageRankConfig,
}

impl Default for InterviewConfig {
    fn default() -> Self {
        InterviewConfig {
            batch_size: 9,
            slot_size: 3,
            exploration_threshold: 30,
            candidate_pool: 25,
            final_list_size: 9,
            extras_size: 9,
            recency: RecencyRule::default(),
            pagerank: PageRankConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Exploration,
    Recommendation,
    Done,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalLists {
    pub predicted_liked: Vec<EntityId>,
    pub predicted_disliked: Vec<EntityId>,
    pub extras: Vec<EntityId>,
}

impl FinalLists {
    pub fn concat(&self) -> Vec<EntityId> {
        self.predicted_liked
            .iter()
            .chain(&self.predicted_disliked)
            .chain(&self.extras)
            .copied()
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsweredBatch {
    pub batch_number: u32,
    pub phase: Phase,
    pub answers: Vec<(EntityId, Sentiment)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterviewSession {
    pub session_id: String,
    pub token: String,
    pub rng_seed: u64,
    pub phase: Phase,
    pub liked: BTreeSet<EntityId>,
    pub disliked: BTreeSet<EntityId>,
    pub unknown: BTreeSet<EntityId>,
    /// Entities shown in this session (answered batches only).
    pub asked: BTreeSet<EntityId>,
    /// Entities shown to the same token in earlier sessions.
    pub previously_asked: BTreeSet<EntityId>,
    pub pending_batch: Vec<EntityId>,
    /// Number of the pending batch; answered batches are numbered below it.
    pub batch_number: u32,
    pub final_lists: Option<FinalLists>,
    pub transcript: Vec<AnsweredBatch>,
    /// Set when the session ended because nothing was left to ask.
    pub truncated: bool,
}

impl InterviewSession {
    pub fn binary_count(&self) -> usize {
        self.liked.len() + self.disliked.len()
    }

    fn is_blocked(&self, id: EntityId) -> bool {
        self.asked.contains(&id) || self.previously_asked.contains(&id)
    }
}

/// Shared, immutable inputs of every interview: the graph, its global
/// PageRank and the movie weights.
#[derive(Clone, Debug)]
pub struct InterviewEngine {
    graph: Arc<KnowledgeGraph>,
    pagerank: PageRankScores,
    movie_weights: Vec<(EntityId, f64)>,
    config: InterviewConfig,
}

impl InterviewEngine {
    pub fn new(
        graph: Arc<KnowledgeGraph>,
        popularity: &Popularity,
        config: InterviewConfig,
    ) -> Result<Self> {
        if config.batch_size == 0 || config.slot_size * 3 > config.batch_size {
            return Err(Error::InvalidArgument(
                "batch_size must hold three exploration slots".into(),
            ));
        }
        let pagerank = global_pagerank(&graph, &config.pagerank)?;
        let movie_weights = popularity.weights(&graph, config.recency);
        Ok(InterviewEngine {
            graph,
            pagerank,
            movie_weights,
            config,
        })
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<KnowledgeGraph> {
        &self.graph
    }

    pub fn pagerank(&self) -> &PageRankScores {
        &self.pagerank
    }

    pub fn config(&self) -> &InterviewConfig {
        &self.config
    }

    fn rng(seed: u64, batch_number: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch_number as u64);
        rng
    }

    fn movie_pool(&self, blocked: impl Fn(EntityId) -> bool) -> Vec<(EntityId, f64)> {
        self.movie_weights
            .iter()
            .copied()
            .filter(|&(id, w)| w > 0.0 && !blocked(id))
            .collect()
    }

    /// Opens a session with a batch of weighted movies none of which the token
    /// has seen before.
    pub fn new_session(
        &self,
        session_id: &str,
        token: &str,
        rng_seed: u64,
        previously_asked: BTreeSet<EntityId>,
    ) -> Result<InterviewSession> {
        let mut session = InterviewSession {
            session_id: session_id.to_string(),
            token: token.to_string(),
            rng_seed,
            phase: Phase::Initial,
            liked: BTreeSet::new(),
            disliked: BTreeSet::new(),
            unknown: BTreeSet::new(),
            asked: BTreeSet::new(),
            previously_asked,
            pending_batch: Vec::new(),
            batch_number: 0,
            final_lists: None,
            transcript: Vec::new(),
            truncated: false,
        };
        let mut rng = Self::rng(rng_seed, 0);
        session.pending_batch = self.initial_batch(&session, &mut rng)?;
        Ok(session)
    }

    fn initial_batch(&self, session: &InterviewSession, rng: &mut ChaCha8Rng) -> Result<Vec<EntityId>> {
        let pool = self.movie_pool(|id| session.is_blocked(id));
        let needed = self.config.batch_size;
        if pool.len() < needed {
            return Err(Error::NotEnoughMovies {
                available: pool.len(),
                needed,
            });
        }
        weighted_sample(&pool, needed, rng)
    }

    /// Nine entities for the exploration phase: three around disliked
    /// entities, three around liked entities and three around randomly drawn
    /// movies, each drawn kind-stratified by PageRank. Short slots are filled
    /// with weighted movies, then with any unasked entity by PageRank.
    pub fn exploration_batch(
        &self,
        session: &InterviewSession,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<EntityId>> {
        let graph = &*self.graph;
        let slot = self.config.slot_size;
        let mut batch: Vec<EntityId> = Vec::with_capacity(self.config.batch_size);
        let fresh = |batch: &[EntityId], id: EntityId| !session.is_blocked(id) && !batch.contains(&id);

        for seeds in [&session.disliked, &session.liked] {
            let adjacent: Vec<EntityId> = graph
                .neighborhood(seeds.iter())
                .into_iter()
                .filter(|&id| fresh(&batch, id))
                .collect();
            batch.extend(exploration_sample(graph, &self.pagerank, &adjacent, slot, rng));
        }

        let all_movies = self.movie_pool(|_| false);
        if !all_movies.is_empty() {
            let seeds = weighted_sample(&all_movies, slot, rng)?;
            let adjacent: Vec<EntityId> = graph
                .neighborhood(seeds.iter())
                .into_iter()
                .filter(|&id| fresh(&batch, id))
                .collect();
            batch.extend(exploration_sample(graph, &self.pagerank, &adjacent, slot, rng));
        }

        let target = self.config.batch_size;
        if batch.len() < target {
            let pool = self.movie_pool(|id| !fresh(&batch, id));
            if !pool.is_empty() {
                batch.extend(weighted_sample(&pool, target - batch.len(), rng)?);
            }
        }
        if batch.len() < target {
            let pool: Vec<(EntityId, f64)> = graph
                .entities()
                .iter()
                .map(|e| e.id)
                .filter(|&id| fresh(&batch, id))
                .map(|id| (id, self.pagerank.get(id).max(f64::MIN_POSITIVE)))
                .collect();
            if !pool.is_empty() {
                batch.extend(weighted_sample(&pool, target - batch.len(), rng)?);
            }
        }
        if batch.len() < target {
            return Err(Error::Exhausted);
        }
        Ok(batch)
    }

    /// Guessed liked and disliked movies plus weighted random extras, pairwise
    /// disjoint and never previously asked.
    pub fn final_lists(&self, session: &InterviewSession, rng: &mut ChaCha8Rng) -> Result<FinalLists> {
        if session.phase != Phase::Recommendation {
            return Err(Error::Invariant(format!(
                "final lists requested in phase {:?}",
                session.phase
            )));
        }
        let graph = &*self.graph;
        let cfg = &self.config;
        let seeds = |s: &BTreeSet<EntityId>| s.iter().copied().collect::<Vec<_>>();

        let predicted_liked = if session.liked.is_empty() {
            Vec::new()
        } else {
            recommendation_candidates(
                graph,
                &self.pagerank,
                &seeds(&session.liked),
                |id| session.is_blocked(id),
                cfg.candidate_pool,
                cfg.final_list_size,
                rng,
            )?
        };
        let predicted_disliked = if session.disliked.is_empty() {
            Vec::new()
        } else {
            recommendation_candidates(
                graph,
                &self.pagerank,
                &seeds(&session.disliked),
                |id| session.is_blocked(id) || predicted_liked.contains(&id),
                cfg.candidate_pool,
                cfg.final_list_size,
                rng,
            )?
        };
        let pool = self.movie_pool(|id| {
            session.is_blocked(id) || predicted_liked.contains(&id) || predicted_disliked.contains(&id)
        });
        let extras = if pool.is_empty() || cfg.extras_size == 0 {
            Vec::new()
        } else {
            weighted_sample(&pool, cfg.extras_size, rng)?
        };
        Ok(FinalLists {
            predicted_liked,
            predicted_disliked,
            extras,
        })
    }

    /// Applies a fully answered batch and draws the next one.
    pub fn submit_batch(
        &self,
        session: &InterviewSession,
        answers: &[(EntityId, Sentiment)],
    ) -> Result<InterviewSession> {
        if session.phase == Phase::Done {
            return Err(Error::SessionDone);
        }
        if answers.len() != session.pending_batch.len() {
            return Err(Error::AnswerMismatch(format!(
                "expected {} answers, got {}",
                session.pending_batch.len(),
                answers.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for &(id, _) in answers {
            if !self.graph.contains(id) {
                return Err(Error::UnknownEntity(id.0));
            }
            if !session.pending_batch.contains(&id) {
                return Err(Error::AnswerMismatch(format!("entity {id} is not in the pending batch")));
            }
            if !seen.insert(id) {
                return Err(Error::AnswerMismatch(format!("entity {id} answered twice")));
            }
        }

        let mut next = session.clone();
        for &(id, s) in answers {
            next.asked.insert(id);
            match s {
                Sentiment::Like => next.liked.insert(id),
                Sentiment::Dislike => next.disliked.insert(id),
                Sentiment::Unknown => next.unknown.insert(id),
            };
        }
        next.transcript.push(AnsweredBatch {
            batch_number: session.batch_number,
            phase: session.phase,
            answers: answers.to_vec(),
        });
        next.batch_number += 1;
        next.pending_batch.clear();

        if next.phase == Phase::Recommendation {
            next.phase = Phase::Done;
            return Ok(next);
        }
        if next.phase == Phase::Initial && next.binary_count() > 0 {
            next.phase = Phase::Exploration;
        }
        if next.phase == Phase::Exploration && next.binary_count() >= self.config.exploration_threshold {
            next.phase = Phase::Recommendation;
        }

        let mut rng = Self::rng(next.rng_seed, next.batch_number);
        match next.phase {
            Phase::Initial => match self.initial_batch(&next, &mut rng) {
                Ok(batch) => next.pending_batch = batch,
                Err(Error::NotEnoughMovies { .. }) => {
                    next.phase = Phase::Done;
                    next.truncated = true;
                }
                Err(e) => return Err(e),
            },
            Phase::Exploration => match self.exploration_batch(&next, &mut rng) {
                Ok(batch) => next.pending_batch = batch,
                Err(Error::Exhausted) => {
                    next.phase = Phase::Done;
                    next.truncated = true;
                }
                Err(e) => return Err(e),
            },
            Phase::Recommendation => {
                let lists = self.final_lists(&next, &mut rng)?;
                next.pending_batch = lists.concat();
                next.final_lists = Some(lists);
                if next.pending_batch.is_empty() {
                    next.phase = Phase::Done;
                    next.truncated = true;
                }
            }
            Phase::Done => unreachable!("handled above"),
        }
        Ok(next)
    }
}

/// Runs a whole interview, answering each shown entity with `oracle`.
pub fn replay_with(
    engine: &InterviewEngine,
    session_id: &str,
    token: &str,
    rng_seed: u64,
    mut oracle: impl FnMut(EntityId) -> Sentiment,
) -> Result<InterviewSession> {
    let mut session = engine.new_session(session_id, token, rng_seed, BTreeSet::new())?;
    while session.phase != Phase::Done {
        let answers: Vec<(EntityId, Sentiment)> =
            session.pending_batch.iter().map(|&id| (id, oracle(id))).collect();
        session = engine.submit_batch(&session, &answers)?;
    }
    Ok(session)
}

/// Runs a whole interview for `user`, answering each entity with the user's
/// recorded sentiment (unknown when unrecorded).
pub fn replay_with_oracle(
    engine: &InterviewEngine,
    store: &RatingStore,
    user: UserId,
    rng_seed: u64,
) -> Result<InterviewSession> {
    let name = store.user_name(user);
    replay_with(engine, &format!("replay-{name}-{rng_seed}"), name, rng_seed, |id| {
        store.sentiment(user, id).unwrap_or(Sentiment::Unknown)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityKind;
    use crate::sampling::MovieMeta;

    /// 40 movies over 6 genres and 10 actors, all with popularity metadata.
    fn fixture() -> (Arc<KnowledgeGraph>, Popularity) {
        let mut b = KnowledgeGraph::builder();
        let genres: Vec<_> = (0..6)
            .map(|i| b.entity(&format!("g{i}"), "", EntityKind::Genre).unwrap())
            .collect();
        let people: Vec<_> = (0..10)
            .map(|i| b.entity(&format!("p{i}"), "", EntityKind::Person).unwrap())
            .collect();
        let mut movies = Vec::new();
        for i in 0..40 {
            let m = b.entity(&format!("m{i:02}"), "", EntityKind::Movie).unwrap();
            b.edge(m, "HAS_GENRE", genres[i % 6]).unwrap();
            b.edge(m, "STARRING", people[i % 10]).unwrap();
            b.edge(m, "STARRING", people[(i * 3 + 1) % 10]).unwrap();
            movies.push(m);
        }
        let g = Arc::new(b.build(false).unwrap());
        let pop = Popularity::new(movies.iter().enumerate().map(|(i, &m)| MovieMeta {
            entity: m,
            external_rating_count: 10 + i as u64,
            release_year: 1990 + i as i32,
        }));
        (g, pop)
    }

    fn engine() -> InterviewEngine {
        let (g, pop) = fixture();
        InterviewEngine::new(g, &pop, InterviewConfig::default()).unwrap()
    }

    fn answer_all(session: &InterviewSession, s: Sentiment) -> Vec<(EntityId, Sentiment)> {
        session.pending_batch.iter().map(|&id| (id, s)).collect()
    }

    #[test]
    fn new_session_draws_nine_distinct_movies() {
        let e = engine();
        let s = e.new_session("s", "t", 7, BTreeSet::new()).unwrap();
        assert_eq!(s.phase, Phase::Initial);
        let uniq: BTreeSet<_> = s.pending_batch.iter().collect();
        assert_eq!(uniq.len(), 9);
        assert!(s.pending_batch.iter().all(|&m| e.graph().is_recommendable(m)));
        assert_eq!(s, e.new_session("s", "t", 7, BTreeSet::new()).unwrap());
    }

    #[test]
    fn new_session_needs_nine_unseen_movies() {
        let e = engine();
        let seen: BTreeSet<_> = e.graph().recommendables().into_iter().skip(5).collect();
        assert!(matches!(
            e.new_session("s", "t", 1, seen),
            Err(Error::NotEnoughMovies { available: 5, needed: 9 })
        ));
    }

    #[test]
    fn initial_phase_repeats_on_all_unknown() {
        let e = engine();
        let s = e.new_session("s", "t", 1, BTreeSet::new()).unwrap();
        let s2 = e.submit_batch(&s, &answer_all(&s, Sentiment::Unknown)).unwrap();
        assert_eq!(s2.phase, Phase::Initial);
        assert_eq!(s2.pending_batch.len(), 9);
        assert!(s2.pending_batch.iter().all(|id| !s2.asked.contains(id)));
    }

    #[test]
    fn one_like_moves_to_exploration() {
        let e = engine();
        let s = e.new_session("s", "t", 1, BTreeSet::new()).unwrap();
        let mut answers = answer_all(&s, Sentiment::Unknown);
        answers[4].1 = Sentiment::Like;
        let s2 = e.submit_batch(&s, &answers).unwrap();
        assert_eq!(s2.phase, Phase::Exploration);
        assert_eq!(s2.pending_batch.len(), 9);
    }

    #[test]
    fn threshold_crossing_enters_recommendation() {
        let e = engine();
        let mut s = e.new_session("s", "t", 3, BTreeSet::new()).unwrap();
        // Pretend 29 binary answers already happened.
        s.phase = Phase::Exploration;
        let movies = e.graph().recommendables();
        for &m in movies.iter().filter(|m| !s.pending_batch.contains(m)).take(29) {
            s.liked.insert(m);
            s.asked.insert(m);
        }
        let mut answers = answer_all(&s, Sentiment::Unknown);
        answers[0].1 = Sentiment::Like;
        answers[1].1 = Sentiment::Dislike;
        let s2 = e.submit_batch(&s, &answers).unwrap();
        assert_eq!(s2.binary_count(), 31);
        assert_eq!(s2.phase, Phase::Recommendation);
        let lists = s2.final_lists.clone().unwrap();
        assert_eq!(s2.pending_batch, lists.concat());
        let done = e.submit_batch(&s2, &answer_all(&s2, Sentiment::Like)).unwrap();
        assert_eq!(done.phase, Phase::Done);
        assert!(matches!(
            e.submit_batch(&done, &[]),
            Err(Error::SessionDone)
        ));
    }

    #[test]
    fn answer_mismatch_leaves_session_untouched() {
        let e = engine();
        let s = e.new_session("s", "t", 1, BTreeSet::new()).unwrap();
        let before = s.clone();
        let mut partial = answer_all(&s, Sentiment::Like);
        partial.pop();
        assert!(matches!(e.submit_batch(&s, &partial), Err(Error::AnswerMismatch(_))));
        let mut dup = answer_all(&s, Sentiment::Like);
        dup[1].0 = dup[0].0;
        assert!(matches!(e.submit_batch(&s, &dup), Err(Error::AnswerMismatch(_))));
        let mut alien = answer_all(&s, Sentiment::Like);
        alien[0].0 = EntityId(10_000);
        assert!(matches!(e.submit_batch(&s, &alien), Err(Error::UnknownEntity(_))));
        assert_eq!(s, before);
    }

    #[test]
    fn exploration_without_dislikes_backfills() {
        let e = engine();
        let s = e.new_session("s", "t", 5, BTreeSet::new()).unwrap();
        let s2 = e.submit_batch(&s, &answer_all(&s, Sentiment::Like)).unwrap();
        assert!(s2.disliked.is_empty());
        assert_eq!(s2.pending_batch.len(), 9);
        let uniq: BTreeSet<_> = s2.pending_batch.iter().collect();
        assert_eq!(uniq.len(), 9);
        assert!(s2.pending_batch.iter().all(|id| !s2.asked.contains(id)));
    }

    #[test]
    fn final_lists_follow_liked_genre() {
        let mut b = KnowledgeGraph::builder();
        let genre = b.entity("g", "", EntityKind::Genre).unwrap();
        let other = b.entity("h", "", EntityKind::Genre).unwrap();
        let mut in_genre = Vec::new();
        let mut movies = Vec::new();
        for i in 0..20 {
            let m = b.entity(&format!("m{i:02}"), "", EntityKind::Movie).unwrap();
            if i < 3 {
                b.edge(m, "HAS_GENRE", genre).unwrap();
                in_genre.push(m);
            } else {
                b.edge(m, "HAS_GENRE", other).unwrap();
            }
            movies.push(m);
        }
        let g = Arc::new(b.build(false).unwrap());
        let pop = Popularity::new(movies.iter().map(|&m| MovieMeta {
            entity: m,
            external_rating_count: 5,
            release_year: 2005,
        }));
        let e = InterviewEngine::new(g, &pop, InterviewConfig::default()).unwrap();
        let mut s = e.new_session("s", "t", 1, BTreeSet::new()).unwrap();
        s.phase = Phase::Recommendation;
        s.pending_batch.clear();
        s.liked.insert(genre);
        s.asked.insert(genre);
        let mut rng = InterviewEngine::rng(1, 1);
        let lists = e.final_lists(&s, &mut rng).unwrap();
        let mut liked = lists.predicted_liked.clone();
        liked.sort();
        assert_eq!(liked, in_genre);
        assert!(lists.predicted_disliked.is_empty());
        assert!(lists.extras.iter().all(|m| !in_genre.contains(m)));
    }

    #[test]
    fn replay_reaches_recommendation_for_engaged_user() {
        use crate::dataset::{Rating, Variant};
        let e = engine();
        let ratings: Vec<Rating> = e
            .graph()
            .entities()
            .iter()
            .map(|en| Rating {
                user: UserId(0),
                entity: en.id,
                sentiment: if en.id.0 % 3 == 0 { Sentiment::Dislike } else { Sentiment::Like },
                is_item: en.recommendable,
            })
            .collect();
        let store = RatingStore::new(
            Variant::All,
            Arc::new(vec!["u".into()]),
            e.graph().len(),
            ratings,
        )
        .unwrap();
        let s = replay_with_oracle(&e, &store, UserId(0), 11).unwrap();
        assert_eq!(s.phase, Phase::Done);
        assert!(!s.truncated);
        assert!(s.binary_count() >= 30);
        assert!(s.transcript.iter().any(|b| b.phase == Phase::Recommendation));
        assert_eq!(s, replay_with_oracle(&e, &store, UserId(0), 11).unwrap());
    }

    #[test]
    fn replay_of_silent_user_truncates() {
        use crate::dataset::Variant;
        let e = engine();
        let store = RatingStore::new(Variant::All, Arc::new(vec!["u".into()]), e.graph().len(), vec![]).unwrap();
        let s = replay_with_oracle(&e, &store, UserId(0), 2).unwrap();
        assert_eq!(s.phase, Phase::Done);
        assert!(s.truncated);
        assert!(s.transcript.iter().all(|b| b.phase == Phase::Initial));
        // 40 movies: four full batches, then fewer than nine remain.
        assert_eq!(s.transcript.len(), 4);
    }
}
