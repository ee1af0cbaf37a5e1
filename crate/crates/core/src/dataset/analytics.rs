//! Descriptive analyses of a rating store.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{RatingStore, Sentiment, UserId};
use crate::kg::{EntityId, EntityKind, KnowledgeGraph};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub ratings: usize,
    pub likes: usize,
    pub dislikes: usize,
    pub unknowns: usize,
    pub rated_entities: usize,
    pub mean_ratings_per_user: f64,
}

pub fn summary(store: &RatingStore) -> DatasetSummary {
    let count = |s| store.ratings().iter().filter(|r| r.sentiment == s).count();
    let users = store.user_count();
    let rated_entities = (0..store.entity_count())
        .filter(|&e| store.entity_rating_count(EntityId(e as u32)) > 0)
        .count();
    DatasetSummary {
        users,
        ratings: store.len(),
        likes: count(Sentiment::Like),
        dislikes: count(Sentiment::Dislike),
        unknowns: count(Sentiment::Unknown),
        rated_entities,
        mean_ratings_per_user: if users == 0 {
            0.0
        } else {
            store.len() as f64 / users as f64
        },
    }
}

/// Cumulative rating share of entities ranked by popularity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongTail {
    /// Rated entities by rating count, most popular first (ties by uri).
    pub ranked: Vec<(EntityId, usize)>,
    /// `(fraction of entities, fraction of ratings)` after each ranked entity.
    pub curve: Vec<(f64, f64)>,
}

impl LongTail {
    /// Share of all ratings held by the most popular `fraction` of entities.
    pub fn share_at(&self, fraction: f64) -> f64 {
        let n = self.curve.len();
        if n == 0 {
            return 0.0;
        }
        let k = ((fraction * n as f64).round() as usize).clamp(0, n);
        if k == 0 {
            0.0
        } else {
            self.curve[k - 1].1
        }
    }

    /// Smallest number of top entities whose ratings reach `share` of the total.
    pub fn entities_for_share(&self, share: f64) -> usize {
        self.curve
            .iter()
            .position(|&(_, s)| s >= share - 1e-12)
            .map_or(self.curve.len(), |i| i + 1)
    }
}

pub fn long_tail_report(store: &RatingStore, graph: &KnowledgeGraph) -> LongTail {
    let mut ranked: Vec<(EntityId, usize)> = (0..store.entity_count())
        .map(|e| EntityId(e as u32))
        .map(|e| (e, store.entity_rating_count(e)))
        .filter(|&(_, c)| c > 0)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| graph.uri(a.0).cmp(graph.uri(b.0))));
    let total = store.len() as f64;
    let n = ranked.len() as f64;
    let mut acc = 0usize;
    let curve = ranked
        .iter()
        .enumerate()
        .map(|(i, &(_, c))| {
            acc += c;
            ((i + 1) as f64 / n, acc as f64 / total)
        })
        .collect();
    LongTail { ranked, curve }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EntityClass {
    Recommendable,
    Descriptive,
}

/// Histogram of co-rated entity counts over unordered user pairs; pairs that
/// share nothing are omitted.
pub fn co_rating_histogram(store: &RatingStore, class: EntityClass) -> BTreeMap<usize, u64> {
    let want_item = class == EntityClass::Recommendable;
    let users: Vec<UserId> = store.users().collect();
    let partials = par::map(&users, |&u| {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for r in store.user_ratings(u).iter().filter(|r| r.is_item == want_item) {
            for other in store.entity_ratings(r.entity) {
                if other.user > u {
                    *counts.entry(other.user.0).or_insert(0) += 1;
                }
            }
        }
        let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
        for c in counts.into_values() {
            *hist.entry(c).or_insert(0) += 1;
        }
        hist
    });
    let mut hist = BTreeMap::new();
    for part in partials {
        for (k, v) in part {
            *hist.entry(k).or_insert(0) += v;
        }
    }
    hist
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coverage {
    pub entities: usize,
    pub no_observation: f64,
    pub unknown_only: f64,
    pub binary: f64,
}

/// Per-kind fraction of entities with no observation, only "don't know"
/// observations, or at least one like/dislike.
pub fn coverage_report(store: &RatingStore, graph: &KnowledgeGraph) -> BTreeMap<EntityKind, Coverage> {
    let mut tallies: BTreeMap<EntityKind, [usize; 3]> = BTreeMap::new();
    for e in graph.entities() {
        let mut any = false;
        let mut binary = false;
        for r in store.entity_ratings(e.id) {
            any = true;
            binary |= r.sentiment.is_binary();
        }
        let slot = if binary {
            2
        } else if any {
            1
        } else {
            0
        };
        tallies.entry(e.kind).or_insert([0; 3])[slot] += 1;
    }
    tallies
        .into_iter()
        .map(|(kind, t)| {
            let n = (t[0] + t[1] + t[2]) as f64;
            (
                kind,
                Coverage {
                    entities: t[0] + t[1] + t[2],
                    no_observation: t[0] as f64 / n,
                    unknown_only: t[1] as f64 / n,
                    binary: t[2] as f64 / n,
                },
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SentimentShares {
    pub like: f64,
    pub dislike: f64,
    pub unknown: f64,
    /// Sessions (users) that rated at least one entity of the kind.
    pub sessions: usize,
}

/// Mean over users of each user's per-kind sentiment distribution. A user's
/// ratings are treated as one session.
pub fn sentiment_distribution_by_kind(
    store: &RatingStore,
    graph: &KnowledgeGraph,
) -> BTreeMap<EntityKind, SentimentShares> {
    let mut sums: BTreeMap<EntityKind, ([f64; 3], usize)> = BTreeMap::new();
    for u in store.users() {
        let mut per_kind: BTreeMap<EntityKind, [usize; 3]> = BTreeMap::new();
        for r in store.user_ratings(u) {
            let slot = match r.sentiment {
                Sentiment::Like => 0,
                Sentiment::Dislike => 1,
                Sentiment::Unknown => 2,
            };
            per_kind.entry(graph.kind(r.entity)).or_insert([0; 3])[slot] += 1;
        }
        for (kind, c) in per_kind {
            let n = (c[0] + c[1] + c[2]) as f64;
            let entry = sums.entry(kind).or_insert(([0.0; 3], 0));
            for i in 0..3 {
                entry.0[i] += c[i] as f64 / n;
            }
            entry.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(kind, (s, n))| {
            let n_f = n as f64;
            (
                kind,
                SentimentShares {
                    like: s[0] / n_f,
                    dislike: s[1] / n_f,
                    unknown: s[2] / n_f,
                    sessions: n,
                },
            )
        })
        .collect()
}

/// The `n` entities most often given each sentiment, ties by uri.
pub fn top_entities_per_sentiment(
    store: &RatingStore,
    graph: &KnowledgeGraph,
    n: usize,
) -> BTreeMap<Sentiment, Vec<(EntityId, usize)>> {
    let mut out = BTreeMap::new();
    for s in [Sentiment::Like, Sentiment::Dislike, Sentiment::Unknown] {
        let mut counts: Vec<(EntityId, usize)> = (0..store.entity_count())
            .map(|e| EntityId(e as u32))
            .map(|e| (e, store.entity_ratings(e).filter(|r| r.sentiment == s).count()))
            .filter(|&(_, c)| c > 0)
            .collect();
        counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| graph.uri(a.0).cmp(graph.uri(b.0))));
        counts.truncate(n);
        out.insert(s, counts);
    }
    out
}
