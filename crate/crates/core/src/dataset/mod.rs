//! Rating observations over knowledge-graph entities.
//!
//! A [`RatingStore`] holds one sentiment per (user, entity). The `All` variant
//! keeps explicit "don't know" answers; the `Binary` variant is the same data
//! with those removed.

mod analytics;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::kg::load::{csv_error, csv_reader, line_of, parse_bool, Columns};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::{Error, Result};

pub use analytics::{
    co_rating_histogram, coverage_report, long_tail_report, sentiment_distribution_by_kind,
    summary, top_entities_per_sentiment, Coverage, DatasetSummary, EntityClass, LongTail,
    SentimentShares,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Like,
    Dislike,
    Unknown,
}

impl Sentiment {
    pub fn value(self) -> i8 {
        match self {
            Sentiment::Like => 1,
            Sentiment::Dislike => -1,
            Sentiment::Unknown => 0,
        }
    }

    pub fn from_value(v: i64) -> Option<Sentiment> {
        match v {
            1 => Some(Sentiment::Like),
            -1 => Some(Sentiment::Dislike),
            0 => Some(Sentiment::Unknown),
            _ => None,
        }
    }

    pub fn is_binary(self) -> bool {
        self != Sentiment::Unknown
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sentiment::Like => "like",
            Sentiment::Dislike => "dislike",
            Sentiment::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rating {
    pub user: UserId,
    pub entity: EntityId,
    pub sentiment: Sentiment,
    pub is_item: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Every observation, including "don't know".
    All,
    /// Like/dislike only.
    Binary,
}

/// Ratings indexed by user and by entity.
///
/// The user vocabulary is shared between a store and every store derived from
/// it, so [`UserId`]s stay valid across splits.
#[derive(Clone, Debug)]
pub struct RatingStore {
    variant: Variant,
    users: Arc<Vec<String>>,
    ratings: Vec<Rating>,
    user_offsets: Vec<usize>,
    by_entity: Vec<Vec<u32>>,
}

impl RatingStore {
    /// Builds a store over `entity_count` entities. Ratings are sorted by
    /// (user, entity); a repeated pair is an error.
    pub fn new(
        variant: Variant,
        users: Arc<Vec<String>>,
        entity_count: usize,
        mut ratings: Vec<Rating>,
    ) -> Result<Self> {
        ratings.sort_unstable_by_key(|r| (r.user, r.entity));
        for w in ratings.windows(2) {
            if (w[0].user, w[0].entity) == (w[1].user, w[1].entity) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate rating for user `{}` on entity {}",
                    users[w[0].user.index()],
                    w[0].entity
                )));
            }
        }
        if variant == Variant::Binary && ratings.iter().any(|r| !r.sentiment.is_binary()) {
            return Err(Error::InvalidArgument(
                "binary store cannot hold unknown sentiments".into(),
            ));
        }
        let mut user_offsets = vec![0usize; users.len() + 1];
        let mut by_entity = vec![Vec::new(); entity_count];
        for (i, r) in ratings.iter().enumerate() {
            if r.user.index() >= users.len() || r.entity.index() >= entity_count {
                return Err(Error::InvalidArgument(format!(
                    "rating references unknown user {} or entity {}",
                    r.user.0, r.entity
                )));
            }
            user_offsets[r.user.index() + 1] += 1;
            by_entity[r.entity.index()].push(i as u32);
        }
        for i in 0..users.len() {
            user_offsets[i + 1] += user_offsets[i];
        }
        Ok(RatingStore {
            variant,
            users,
            ratings,
            user_offsets,
            by_entity,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn entity_count(&self) -> usize {
        self.by_entity.len()
    }

    /// Size of the shared user vocabulary, including users without ratings here.
    pub fn user_vocab_len(&self) -> usize {
        self.users.len()
    }

    pub fn user_vocab(&self) -> &Arc<Vec<String>> {
        &self.users
    }

    pub fn user_name(&self, user: UserId) -> &str {
        &self.users[user.index()]
    }

    pub fn lookup_user(&self, name: &str) -> Option<UserId> {
        self.users
            .iter()
            .position(|u| u == name)
            .map(|i| UserId(i as u32))
    }

    /// Users with at least one rating in this store.
    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.users.len())
            .filter(|&u| self.user_offsets[u + 1] > self.user_offsets[u])
            .map(|u| UserId(u as u32))
    }

    pub fn user_count(&self) -> usize {
        self.users().count()
    }

    /// Ratings of `user`, sorted by entity.
    pub fn user_ratings(&self, user: UserId) -> &[Rating] {
        let u = user.index();
        if u >= self.users.len() {
            return &[];
        }
        &self.ratings[self.user_offsets[u]..self.user_offsets[u + 1]]
    }

    pub fn entity_ratings(&self, entity: EntityId) -> impl Iterator<Item = &Rating> + '_ {
        self.by_entity
            .get(entity.index())
            .into_iter()
            .flatten()
            .map(move |&i| &self.ratings[i as usize])
    }

    pub fn entity_rating_count(&self, entity: EntityId) -> usize {
        self.by_entity.get(entity.index()).map_or(0, Vec::len)
    }

    pub fn sentiment(&self, user: UserId, entity: EntityId) -> Option<Sentiment> {
        let rs = self.user_ratings(user);
        rs.binary_search_by_key(&entity, |r| r.entity)
            .ok()
            .map(|i| rs[i].sentiment)
    }

    /// Keeps the ratings matching `keep`, with the same variant and user vocabulary.
    pub fn filter(&self, keep: impl Fn(&Rating) -> bool) -> RatingStore {
        let ratings = self.ratings.iter().filter(|r| keep(r)).copied().collect();
        RatingStore::new(self.variant, self.users.clone(), self.entity_count(), ratings)
            .expect("subset of a valid store is valid")
    }

    /// Drops "don't know" answers.
    pub fn to_binary(&self) -> RatingStore {
        let ratings = self
            .ratings
            .iter()
            .filter(|r| r.sentiment.is_binary())
            .copied()
            .collect();
        RatingStore::new(Variant::Binary, self.users.clone(), self.entity_count(), ratings)
            .expect("subset of a valid store is valid")
    }

    /// Replaces the rating set, keeping variant and user vocabulary.
    pub fn with_ratings(&self, ratings: Vec<Rating>) -> Result<RatingStore> {
        RatingStore::new(self.variant, self.users.clone(), self.entity_count(), ratings)
    }
}

/// Loads a `user_id,entity_uri,is_item,sentiment` file. Users are numbered in
/// order of first appearance.
pub fn load_ratings(path: &Path, graph: &KnowledgeGraph) -> Result<RatingStore> {
    let mut rdr = csv_reader(path)?;
    let cols = Columns::new(rdr.headers().map_err(|e| csv_error(path, e))?);
    let c_user = cols.require(path, &["user_id", "userid", "user"])?;
    let c_uri = cols.require(path, &["entity_uri", "uri"])?;
    let c_item = cols.find(&["is_item", "isitem"]);
    let c_sent = cols.require(path, &["sentiment"])?;

    let mut names: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut seen = std::collections::HashSet::new();
    let mut ratings = Vec::new();

    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = line_of(&record);
        let uri = &record[c_uri];
        let entity = graph.lookup(uri).ok_or_else(|| Error::DanglingUri {
            path: path.to_path_buf(),
            line,
            uri: uri.to_string(),
        })?;
        let recommendable = graph.is_recommendable(entity);
        let is_item = match c_item {
            Some(c) => parse_bool(&record[c]).ok_or_else(|| {
                Error::malformed(path, line, format!("expected true/false, got `{}`", &record[c]))
            })?,
            None => recommendable,
        };
        if is_item != recommendable {
            return Err(Error::malformed(
                path,
                line,
                format!("is_item={is_item} disagrees with entity `{uri}`"),
            ));
        }
        let sentiment = record[c_sent]
            .parse::<i64>()
            .ok()
            .and_then(Sentiment::from_value)
            .ok_or_else(|| {
                Error::malformed(path, line, format!("bad sentiment `{}`", &record[c_sent]))
            })?;
        let name = &record[c_user];
        let user = *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            UserId(names.len() as u32 - 1)
        });
        if !seen.insert((user, entity)) {
            return Err(Error::malformed(
                path,
                line,
                format!("duplicate rating of `{uri}` by user `{name}`"),
            ));
        }
        ratings.push(Rating {
            user,
            entity,
            sentiment,
            is_item,
        });
    }
    RatingStore::new(Variant::All, Arc::new(names), graph.len(), ratings)
}

/// Writes `user_id,entity_uri,is_item,sentiment` rows ordered by user name,
/// then entity uri.
pub fn write_ratings<W: std::io::Write>(
    store: &RatingStore,
    graph: &KnowledgeGraph,
    out: W,
) -> std::io::Result<()> {
    let mut rows: Vec<&Rating> = store.ratings().iter().collect();
    rows.sort_by(|a, b| {
        store
            .user_name(a.user)
            .cmp(store.user_name(b.user))
            .then_with(|| graph.uri(a.entity).cmp(graph.uri(b.entity)))
    });
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "entity_uri", "is_item", "sentiment"])?;
    for r in rows {
        w.write_record([
            store.user_name(r.user),
            graph.uri(r.entity),
            if r.is_item { "true" } else { "false" },
            &r.sentiment.value().to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::kg::tests::small_graph;
    use std::io::Write;

    pub(crate) fn store_from(
        graph: &KnowledgeGraph,
        variant: Variant,
        rows: &[(&str, &str, i64)],
    ) -> RatingStore {
        let mut names: Vec<String> = Vec::new();
        let mut ratings = Vec::new();
        for &(u, uri, s) in rows {
            let user = match names.iter().position(|n| n == u) {
                Some(i) => UserId(i as u32),
                None => {
                    names.push(u.to_string());
                    UserId(names.len() as u32 - 1)
                }
            };
            let entity = graph.lookup(uri).unwrap();
            ratings.push(Rating {
                user,
                entity,
                sentiment: Sentiment::from_value(s).unwrap(),
                is_item: graph.is_recommendable(entity),
            });
        }
        RatingStore::new(variant, Arc::new(names), graph.len(), ratings).unwrap()
    }

    #[test]
    fn loads_and_counts() {
        let g = small_graph();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ratings.csv");
        std::fs::File::create(&p)
            .unwrap()
            .write_all(
                b"user_id,entity_uri,is_item,sentiment\n\
                  a,m0,true,1\na,m1,true,-1\na,g:drama,false,0\n\
                  b,m0,true,1\nb,g:action,false,1\nb,m4,true,0\n",
            )
            .unwrap();
        let s = load_ratings(&p, &g).unwrap();
        assert_eq!(s.user_count(), 2);
        assert_eq!(s.len(), 6);
        assert_eq!(s.variant(), Variant::All);
        let a = s.lookup_user("a").unwrap();
        assert_eq!(s.sentiment(a, g.lookup("m1").unwrap()), Some(Sentiment::Dislike));
        assert_eq!(s.entity_rating_count(g.lookup("m0").unwrap()), 2);

        let bin = s.to_binary();
        assert_eq!(bin.len(), 4);
        assert_eq!(bin.variant(), Variant::Binary);
    }

    #[test]
    fn load_errors() {
        let g = small_graph();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ratings.csv");
        let cases: [(&[u8], fn(&Error) -> bool); 4] = [
            (
                b"user_id,entity_uri,is_item,sentiment\na,m0,true,1\na,m0,true,-1\n",
                |e| matches!(e, Error::Malformed { line: 3, .. }),
            ),
            (
                b"user_id,entity_uri,is_item,sentiment\na,zzz,true,1\n",
                |e| matches!(e, Error::DanglingUri { line: 2, .. }),
            ),
            (
                b"user_id,entity_uri,is_item,sentiment\na,g:drama,true,1\n",
                |e| matches!(e, Error::Malformed { line: 2, .. }),
            ),
            (
                b"user_id,entity_uri,is_item,sentiment\na,m0,true,2\n",
                |e| matches!(e, Error::Malformed { line: 2, .. }),
            ),
        ];
        for (body, check) in cases {
            std::fs::write(&p, body).unwrap();
            let err = load_ratings(&p, &g).unwrap_err();
            assert!(check(&err), "{err:?}");
        }
    }

    #[test]
    fn binary_view_is_a_filter() {
        let g = small_graph();
        let mut rows = Vec::new();
        let names: Vec<String> = (0..10).map(|i| format!("u{i}")).collect();
        let uris = ["m0", "m1", "m2", "m3", "m4", "g:drama", "g:action", "c:fiction"];
        for (i, n) in names.iter().enumerate() {
            for (j, uri) in uris.iter().enumerate() {
                let s = match (i + j) % 7 {
                    0 => 1,
                    1 => -1,
                    _ => 0,
                };
                rows.push((n.as_str(), *uri, s));
            }
        }
        let all = store_from(&g, Variant::All, &rows);
        let bin = all.to_binary();
        let unknown = all
            .ratings()
            .iter()
            .filter(|r| r.sentiment == Sentiment::Unknown)
            .count();
        assert_eq!(all.len(), bin.len() + unknown);
        assert!(bin.ratings().iter().all(|r| all.ratings().contains(r)));
    }

    #[test]
    fn all_unknown_user_absent_from_binary() {
        let g = small_graph();
        let s = store_from(&g, Variant::All, &[("a", "m0", 0), ("a", "m1", 0), ("b", "m0", 1)]);
        let bin = s.to_binary();
        assert_eq!(bin.users().collect::<Vec<_>>(), vec![UserId(1)]);
        assert!(bin.user_ratings(UserId(0)).is_empty());
    }
}
