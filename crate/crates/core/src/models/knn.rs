//! Neighbourhood recommenders over cosine similarity of +1/-1 rating vectors.
//!
//! Only positively similar neighbours are kept; a user or entity with no
//! ratings has similarity 0 to everything.

use std::cmp::Ordering;

use super::Recommender;
use crate::dataset::{RatingStore, UserId};
use crate::kg::EntityId;
use crate::par;

/// Cosine similarity of dense vectors; 0 when either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

fn value(s: crate::dataset::Sentiment) -> f64 {
    s.value() as f64
}

/// Keeps the `k` largest positive similarities, ties broken by id.
fn top_k(mut sims: Vec<(u32, f64)>, k: usize) -> Vec<(u32, f64)> {
    sims.retain(|&(_, s)| s > 0.0);
    sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    sims.truncate(k);
    sims
}

/// Rating-vector norms; every binary rating contributes 1.
fn norms(counts: impl Iterator<Item = usize>) -> Vec<f64> {
    counts.map(|c| (c as f64).sqrt()).collect()
}

#[derive(Clone, Debug)]
pub struct UserKnn {
    k: usize,
    train: RatingStore,
    neighbours: Vec<Vec<(u32, f64)>>,
}

impl UserKnn {
    pub fn fit(train: &RatingStore, k: usize) -> Self {
        let n = train.user_vocab_len();
        let norm = norms((0..n).map(|u| binary_count(train.user_ratings(UserId(u as u32)))));
        let neighbours = par::map_range(n, |u| {
            let mut acc = vec![0.0; n];
            for r in train.user_ratings(UserId(u as u32)) {
                for o in train.entity_ratings(r.entity) {
                    if o.user.index() != u {
                        acc[o.user.index()] += value(r.sentiment) * value(o.sentiment);
                    }
                }
            }
            let sims = acc
                .iter()
                .enumerate()
                .filter(|&(_, &d)| d != 0.0)
                .map(|(v, &d)| (v as u32, d / (norm[u] * norm[v])))
                .collect();
            top_k(sims, k)
        });
        UserKnn {
            k,
            train: train.clone(),
            neighbours,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbours(&self, user: UserId) -> &[(u32, f64)] {
        self.neighbours.get(user.index()).map_or(&[], |v| v.as_slice())
    }
}

fn binary_count(rs: &[crate::dataset::Rating]) -> usize {
    rs.iter().filter(|r| r.sentiment.is_binary()).count()
}

impl Recommender for UserKnn {
    fn name(&self) -> String {
        "User kNN".into()
    }

    fn score(&self, user: UserId, entity: EntityId) -> f64 {
        self.neighbours(user)
            .iter()
            .filter_map(|&(v, sim)| {
                self.train
                    .sentiment(UserId(v), entity)
                    .map(|s| sim * value(s))
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct ItemKnn {
    k: usize,
    train: RatingStore,
    neighbours: Vec<Vec<(u32, f64)>>,
}

impl ItemKnn {
    pub fn fit(train: &RatingStore, k: usize) -> Self {
        let n = train.entity_count();
        let norm = norms((0..n).map(|e| {
            train
                .entity_ratings(EntityId(e as u32))
                .filter(|r| r.sentiment.is_binary())
                .count()
        }));
        let neighbours = par::map_range(n, |e| {
            if norm[e] == 0.0 {
                return Vec::new();
            }
            let mut acc = std::collections::BTreeMap::<u32, f64>::new();
            for r in train.entity_ratings(EntityId(e as u32)) {
                for o in train.user_ratings(r.user) {
                    if o.entity.index() != e {
                        *acc.entry(o.entity.0).or_default() +=
                            value(r.sentiment) * value(o.sentiment);
                    }
                }
            }
            let sims = acc
                .into_iter()
                .filter(|&(_, d)| d != 0.0)
                .map(|(f, d)| (f, d / (norm[e] * norm[f as usize])))
                .collect();
            top_k(sims, k)
        });
        ItemKnn {
            k,
            train: train.clone(),
            neighbours,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbours(&self, entity: EntityId) -> &[(u32, f64)] {
        self.neighbours.get(entity.index()).map_or(&[], |v| v.as_slice())
    }
}

impl Recommender for ItemKnn {
    fn name(&self) -> String {
        "Item kNN".into()
    }

    fn score(&self, user: UserId, entity: EntityId) -> f64 {
        self.neighbours(entity)
            .iter()
            .filter_map(|&(f, sim)| {
                self.train
                    .sentiment(user, EntityId(f))
                    .map(|s| sim * value(s))
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::store_from;
    use crate::dataset::Variant;
    use crate::kg::tests::small_graph;

    #[test]
    fn cosine_extremes() {
        assert!((cosine(&[1.0, -1.0, 1.0], &[1.0, -1.0, 1.0]) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, -1.0]), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    // Hand computation on three users over m0..m4:
    //   a: m0+ m1+ m2-
    //   b: m0+ m1+ m3+
    //   c: m0- m2+ m4+
    // cos(a,b) = 2/(sqrt3*sqrt3) = 2/3; cos(a,c) = (-1-1)/3 = -2/3 (dropped).
    fn fixture() -> (crate::kg::KnowledgeGraph, RatingStore) {
        let g = small_graph();
        let s = store_from(
            &g,
            Variant::Binary,
            &[
                ("a", "m0", 1),
                ("a", "m1", 1),
                ("a", "m2", -1),
                ("b", "m0", 1),
                ("b", "m1", 1),
                ("b", "m3", 1),
                ("c", "m0", -1),
                ("c", "m2", 1),
                ("c", "m4", 1),
            ],
        );
        (g, s)
    }

    #[test]
    fn user_knn_matches_hand_sums() {
        let (g, s) = fixture();
        let m = UserKnn::fit(&s, 20);
        let a = s.lookup_user("a").unwrap();
        let e = |u| g.lookup(u).unwrap();
        assert!((m.score(a, e("m3")) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.score(a, e("m4")), 0.0);
        // cos(b,c) = -1/3, cos(a,b) = 2/3: b only sees a.
        let b = s.lookup_user("b").unwrap();
        assert!((m.score(b, e("m2")) + 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn item_knn_matches_hand_sums() {
        let (g, s) = fixture();
        let m = ItemKnn::fit(&s, 20);
        let e = |u| g.lookup(u).unwrap();
        // Item vectors over (a,b,c): m0=(1,1,-1), m1=(1,1,0), m3=(0,1,0).
        // cos(m3,m0)=1/sqrt3, cos(m3,m1)=1/sqrt2; a rated m0+, m1+.
        let a = s.lookup_user("a").unwrap();
        let want = 1.0 / 3f64.sqrt() + 1.0 / 2f64.sqrt();
        assert!((m.score(a, e("m3")) - want).abs() < 1e-12);
        let m1 = ItemKnn::fit(&s, 1);
        assert!((m1.score(a, e("m3")) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }
}
