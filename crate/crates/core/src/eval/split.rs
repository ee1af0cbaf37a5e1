use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Rating, RatingStore, Sentiment, UserId};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::{par, Error, Result};

const LOO_STREAM: u64 = 0x4c4f_4f00;
const MOVIE_STREAM: u64 = 0x4d4f_5600;
const DESC_STREAM: u64 = 0x4445_5300;

/// Independent stream per (seed, purpose, user), so per-user draws do not
/// depend on iteration order or on other users.
fn keyed_rng(seed: u64, purpose: u64, user: UserId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.rotate_left(32));
    rng.set_stream(user.0 as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LooConfig {
    /// Sampled unrated movies per test user; 0 ranks against all of them.
    pub negatives: usize,
    pub exclude_top_popular: bool,
    /// Share of rated entities, by binary rating count, barred from the test set.
    pub popular_fraction: f64,
}

impl Default for LooConfig {
    fn default() -> Self {
        LooConfig {
            negatives: 99,
            exclude_top_popular: true,
            popular_fraction: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LooCase {
    pub user: UserId,
    pub held_out: EntityId,
    /// The held-out entity plus negatives, ascending by id.
    pub candidates: Vec<EntityId>,
}

#[derive(Clone, Debug)]
pub struct LooSplit {
    pub cases: Vec<LooCase>,
    pub train: RatingStore,
    pub excluded: Vec<EntityId>,
    /// Test users that had fewer unrated movies than requested negatives.
    pub clamped_users: usize,
}

/// The most-rated `round(fraction * rated)` entities, where `rated` is the
/// number of entities with at least one binary rating. Ties go to the lower id.
pub fn popular_entities(store: &RatingStore, fraction: f64) -> Vec<EntityId> {
    let mut counts = vec![0u32; store.entity_count()];
    for r in store.ratings().iter().filter(|r| r.sentiment.is_binary()) {
        counts[r.entity.index()] += 1;
    }
    let mut rated: Vec<(u32, u32)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(e, &c)| (e as u32, c))
        .collect();
    rated.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let take = (fraction * rated.len() as f64).round() as usize;
    rated.into_iter().take(take).map(|(e, _)| EntityId(e)).collect()
}

/// Holds out one liked movie per user and pairs it with sampled negatives.
///
/// Users without an eligible liked movie stay in the training data but get no
/// test case.
pub fn build_loo(
    store: &RatingStore,
    graph: &KnowledgeGraph,
    cfg: &LooConfig,
    seed: u64,
) -> Result<LooSplit> {
    if !(0.0..=1.0).contains(&cfg.popular_fraction) {
        return Err(Error::InvalidArgument("popular_fraction must be in [0, 1]".into()));
    }
    let excluded = if cfg.exclude_top_popular {
        popular_entities(store, cfg.popular_fraction)
    } else {
        Vec::new()
    };
    let barred: HashSet<EntityId> = excluded.iter().copied().collect();
    let movies = graph.recommendables();
    let users: Vec<UserId> = store.users().collect();

    let drawn: Vec<Option<(LooCase, bool)>> = par::map(&users, |&u| {
        let rs = store.user_ratings(u);
        let eligible: Vec<EntityId> = rs
            .iter()
            .filter(|r| {
                r.sentiment == Sentiment::Like
                    && graph.is_recommendable(r.entity)
                    && !barred.contains(&r.entity)
            })
            .map(|r| r.entity)
            .collect();
        if eligible.is_empty() {
            return None;
        }
        let mut rng = keyed_rng(seed, LOO_STREAM, u);
        let held_out = eligible[rng.random_range(0..eligible.len())];
        let unrated: Vec<EntityId> = movies
            .iter()
            .copied()
            .filter(|&e| rs.binary_search_by_key(&e, |r| r.entity).is_err())
            .collect();
        let (mut candidates, clamped) = if cfg.negatives == 0 || cfg.negatives >= unrated.len() {
            (unrated.clone(), cfg.negatives > unrated.len())
        } else {
            let picked = index::sample(&mut rng, unrated.len(), cfg.negatives);
            (picked.into_iter().map(|i| unrated[i]).collect(), false)
        };
        candidates.push(held_out);
        candidates.sort_unstable();
        Some((
            LooCase {
                user: u,
                held_out,
                candidates,
            },
            clamped,
        ))
    });

    let mut cases = Vec::new();
    let mut clamped_users = 0;
    for (case, clamped) in drawn.into_iter().flatten() {
        clamped_users += clamped as usize;
        cases.push(case);
    }
    if clamped_users > 0 {
        log::warn!("{clamped_users} test users had fewer than {} unrated movies", cfg.negatives);
    }
    let held: HashSet<(UserId, EntityId)> = cases.iter().map(|c| (c.user, c.held_out)).collect();
    let train = store.filter(|r| !held.contains(&(r.user, r.entity)));
    Ok(LooSplit {
        cases,
        train,
        excluded,
        clamped_users,
    })
}

/// Training-data recipe. Substitute and Remove take `n` of `m = 4` quarters
/// of each user's movie ratings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Movie and descriptive ratings.
    AddAll,
    /// Movie ratings only.
    MoviesOnly,
    /// `floor(n/4 * N)` movie ratings plus up to `ceil((4-n)/4 * N)`
    /// descriptive ratings, `N` being the user's movie rating count.
    Substitute(u8),
    /// The same movie ratings as `Substitute(n)` and nothing else.
    Remove(u8),
}

pub const QUARTERS: usize = 4;

impl Setting {
    pub fn label(&self) -> String {
        match self {
            Setting::AddAll => "All entities".into(),
            Setting::MoviesOnly => "All movies".into(),
            Setting::Substitute(n) => format!("{n}/{QUARTERS}"),
            Setting::Remove(n) => format!("{n}/{QUARTERS} (no DEs)"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Setting::Substitute(n) | Setting::Remove(n) if !(1..=QUARTERS as u8).contains(n) => Err(
                Error::InvalidArgument(format!("n must be in 1..={QUARTERS}, got {n}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Applies `setting` to a training store. Per-user draws are keyed by
/// `(seed, user)`, so `Substitute(n)` and `Remove(n)` keep identical movie
/// ratings.
pub fn build_experiment_store(train: &RatingStore, setting: Setting, seed: u64) -> Result<RatingStore> {
    setting.validate()?;
    let n = match setting {
        Setting::AddAll => return Ok(train.clone()),
        Setting::MoviesOnly => return Ok(train.filter(|r| r.is_item)),
        Setting::Substitute(n) | Setting::Remove(n) => n as usize,
    };
    let users: Vec<UserId> = train.users().collect();
    let per_user: Vec<(Vec<Rating>, usize)> = par::map(&users, |&u| {
        let rs = train.user_ratings(u);
        let movies: Vec<Rating> = rs.iter().filter(|r| r.is_item).copied().collect();
        let desc: Vec<Rating> = rs.iter().filter(|r| !r.is_item).copied().collect();
        let total = movies.len();
        let keep_movies = n * total / QUARTERS;
        let mut rng = keyed_rng(seed, MOVIE_STREAM, u);
        let mut kept: Vec<Rating> = index::sample(&mut rng, total, keep_movies)
            .into_iter()
            .map(|i| movies[i])
            .collect();
        let mut shortfall = 0;
        if matches!(setting, Setting::Substitute(_)) {
            let want = ((QUARTERS - n) * total).div_ceil(QUARTERS);
            let take = want.min(desc.len());
            shortfall = want - take;
            let mut rng = keyed_rng(seed, DESC_STREAM, u);
            kept.extend(index::sample(&mut rng, desc.len(), take).into_iter().map(|i| desc[i]));
        }
        (kept, shortfall)
    });
    let short_users = per_user.iter().filter(|(_, s)| *s > 0).count();
    if short_users > 0 {
        log::debug!("{short_users} users had too few descriptive ratings for {}", setting.label());
    }
    train.with_ratings(per_user.into_iter().flat_map(|(r, _)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::store_from;
    use crate::dataset::Variant;
    use crate::kg::tests::small_graph;

    #[test]
    fn single_liked_movie_is_held_out() {
        let g = small_graph();
        let s = store_from(&g, Variant::Binary, &[("a", "m2", 1), ("a", "m0", -1), ("a", "g:drama", 1)]);
        let cfg = LooConfig {
            negatives: 2,
            exclude_top_popular: false,
            ..Default::default()
        };
        let split = build_loo(&s, &g, &cfg, 7).unwrap();
        assert_eq!(split.cases.len(), 1);
        let c = &split.cases[0];
        assert_eq!(c.held_out, g.lookup("m2").unwrap());
        assert_eq!(c.candidates.len(), 3);
        assert!(!c.candidates.contains(&g.lookup("m0").unwrap()));
        assert_eq!(split.train.len(), 2);
    }

    #[test]
    fn popular_only_user_leaves_test_set() {
        let g = small_graph();
        // m0 is the most rated of the 3 rated entities; round(0.34 * 3) = 1.
        let s = store_from(
            &g,
            Variant::Binary,
            &[("a", "m0", 1), ("b", "m0", 1), ("b", "m1", 1), ("c", "m0", 1), ("c", "m2", -1)],
        );
        let cfg = LooConfig {
            popular_fraction: 0.34,
            ..Default::default()
        };
        let split = build_loo(&s, &g, &cfg, 1).unwrap();
        assert_eq!(split.excluded, vec![g.lookup("m0").unwrap()]);
        let users: Vec<_> = split.cases.iter().map(|c| s.user_name(c.user)).collect();
        assert_eq!(users, vec!["b"]);
        assert_eq!(split.train.user_ratings(s.lookup_user("a").unwrap()).len(), 1);
    }

    #[test]
    fn negatives_clamp_to_available() {
        let g = small_graph();
        let s = store_from(&g, Variant::Binary, &[("a", "m0", 1)]);
        let split = build_loo(&s, &g, &LooConfig { exclude_top_popular: false, ..Default::default() }, 0).unwrap();
        assert_eq!(split.cases[0].candidates.len(), 5);
        assert_eq!(split.clamped_users, 1);
    }

    #[test]
    fn substitution_formula() {
        let g = small_graph();
        let mut rows = vec![("a", "m0", 1), ("a", "m1", 1), ("a", "m2", -1), ("a", "m3", 1)];
        rows.extend([("a", "g:drama", 1), ("a", "g:action", -1), ("a", "c:fiction", 1)]);
        let s = store_from(&g, Variant::Binary, &rows);
        let count = |st: &RatingStore| {
            let movies = st.ratings().iter().filter(|r| r.is_item).count();
            (movies, st.len() - movies)
        };
        // N = 4: n=1 keeps 1 movie and wants 3 DEs.
        assert_eq!(count(&build_experiment_store(&s, Setting::Substitute(1), 3).unwrap()), (1, 3));
        assert_eq!(count(&build_experiment_store(&s, Setting::Remove(1), 3).unwrap()), (1, 0));
        assert_eq!(count(&build_experiment_store(&s, Setting::Substitute(3), 3).unwrap()), (3, 1));
        assert_eq!(
            build_experiment_store(&s, Setting::Substitute(4), 3).unwrap().ratings(),
            build_experiment_store(&s, Setting::MoviesOnly, 3).unwrap().ratings()
        );
        assert!(build_experiment_store(&s, Setting::Remove(5), 3).is_err());
    }

    #[test]
    fn substitute_and_remove_share_movies() {
        let g = small_graph();
        let mut rows: Vec<(&str, &str, i64)> = Vec::new();
        for u in ["a", "b", "c"] {
            for m in ["m0", "m1", "m2", "m3", "m4"] {
                rows.push((u, m, 1));
            }
            rows.push((u, "g:drama", -1));
        }
        let s = store_from(&g, Variant::Binary, &rows);
        for n in 1..=4u8 {
            let sub = build_experiment_store(&s, Setting::Substitute(n), 11).unwrap();
            let rem = build_experiment_store(&s, Setting::Remove(n), 11).unwrap();
            let sub_movies: Vec<_> = sub.ratings().iter().filter(|r| r.is_item).copied().collect();
            assert_eq!(sub_movies, rem.ratings());
        }
    }
}
