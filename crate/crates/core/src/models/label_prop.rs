//! Propagating a user's movie ratings to descriptive entities.
//!
//! Rated nodes start at +1 / -1 and stay clamped; every other node starts at 0
//! and takes the mean of its neighbours each round. A final score of 0 or more
//! is a like.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{RatingStore, Sentiment};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::{par, Error, Result};

/// Simple undirected adjacency in CSR form.
#[derive(Clone, Debug)]
pub struct LabelPropagator {
    offsets: Vec<usize>,
    neighbours: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelScores {
    pub scores: Vec<f64>,
}

impl LabelScores {
    pub fn label(&self, e: EntityId) -> Sentiment {
        if self.scores[e.index()] >= 0.0 {
            Sentiment::Like
        } else {
            Sentiment::Dislike
        }
    }
}

impl LabelPropagator {
    pub fn new(graph: &KnowledgeGraph) -> Self {
        let n = graph.len();
        let pairs = graph.undirected_pairs();
        let mut offsets = vec![0usize; n + 1];
        for &(a, b) in &pairs {
            offsets[a as usize + 1] += 1;
            offsets[b as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut neighbours = vec![0u32; pairs.len() * 2];
        for &(a, b) in &pairs {
            neighbours[cursor[a as usize]] = b;
            cursor[a as usize] += 1;
            neighbours[cursor[b as usize]] = a;
            cursor[b as usize] += 1;
        }
        LabelPropagator {
            offsets,
            neighbours,
        }
    }

    /// Runs exactly `iters` rounds; `Unknown` seeds are ignored.
    pub fn propagate(&self, seeds: &[(EntityId, Sentiment)], iters: usize) -> LabelScores {
        let n = self.offsets.len() - 1;
        let mut f = vec![0.0; n];
        let mut clamped = vec![false; n];
        for &(e, s) in seeds {
            if s.is_binary() {
                f[e.index()] = s.value() as f64;
                clamped[e.index()] = true;
            }
        }
        let mut next = f.clone();
        for _ in 0..iters {
            for v in 0..n {
                if clamped[v] {
                    continue;
                }
                let nb = &self.neighbours[self.offsets[v]..self.offsets[v + 1]];
                next[v] = if nb.is_empty() {
                    0.0
                } else {
                    nb.iter().map(|&u| f[u as usize]).sum::<f64>() / nb.len() as f64
                };
            }
            std::mem::swap(&mut f, &mut next);
            next.copy_from_slice(&f);
        }
        LabelScores { scores: f }
    }
}

/// One-shot propagation over `graph`.
pub fn label_propagate(
    graph: &KnowledgeGraph,
    seeds: &[(EntityId, Sentiment)],
    iters: usize,
) -> LabelScores {
    LabelPropagator::new(graph).propagate(seeds, iters)
}

/// Counts with "like" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    fn add(&mut self, truth: Sentiment, predicted: Sentiment) {
        match (truth == Sentiment::Like, predicted == Sentiment::Like) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    fn merge(mut self, o: Confusion) -> Confusion {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
        self
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn positive(&self) -> LabelMetrics {
        LabelMetrics::new(self.tp, self.fp, self.fn_)
    }

    pub fn negative(&self) -> LabelMetrics {
        LabelMetrics::new(self.tn, self.fn_, self.fp)
    }

    pub fn macro_avg(&self) -> LabelMetrics {
        let (p, n) = (self.positive(), self.negative());
        LabelMetrics {
            precision: (p.precision + n.precision) / 2.0,
            recall: (p.recall + n.recall) / 2.0,
            f1: (p.f1 + n.f1) / 2.0,
            support: p.support + n.support,
        }
    }

    pub fn weighted_avg(&self) -> LabelMetrics {
        let (p, n) = (self.positive(), self.negative());
        let t = (p.support + n.support) as f64;
        let w = |a: f64, b: f64| {
            if t == 0.0 {
                0.0
            } else {
                (a * p.support as f64 + b * n.support as f64) / t
            }
        };
        LabelMetrics {
            precision: w(p.precision, n.precision),
            recall: w(p.recall, n.recall),
            f1: w(p.f1, n.f1),
            support: p.support + n.support,
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LabelMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl LabelMetrics {
    fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        LabelMetrics {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelPropagationReport {
    pub users: usize,
    pub iters: usize,
    pub propagation: Confusion,
    pub random: Confusion,
    /// Like probability of the weighted-random baseline: the like share of
    /// all binary ratings.
    pub like_probability: f64,
    /// Expected accuracy of the weighted-random baseline on the same targets.
    pub random_expected_accuracy: f64,
    /// Mean per-user count of descriptive entities predicted like / dislike.
    pub mean_predicted_likes: f64,
    pub mean_predicted_dislikes: f64,
}

impl LabelPropagationReport {
    pub fn accuracy(&self) -> f64 {
        self.propagation.accuracy()
    }

    pub fn random_accuracy(&self) -> f64 {
        self.random.accuracy()
    }

    pub fn predicted_like_ratio(&self) -> f64 {
        let t = self.mean_predicted_likes + self.mean_predicted_dislikes;
        if t == 0.0 {
            0.0
        } else {
            self.mean_predicted_likes / t
        }
    }
}

struct UserOutcome {
    truths: Vec<Sentiment>,
    confusion: Confusion,
    predicted_likes: u64,
    predicted_dislikes: u64,
}

/// Predicts every user's descriptive-entity ratings from their movie ratings
/// and compares against a like-weighted coin flip.
///
/// Users need at least one binary movie rating and one binary descriptive
/// rating to be evaluated.
pub fn evaluate_label_propagation(
    store: &RatingStore,
    graph: &KnowledgeGraph,
    iters: usize,
    seed: u64,
) -> Result<LabelPropagationReport> {
    let binary: Vec<_> = store.ratings().iter().filter(|r| r.sentiment.is_binary()).collect();
    let likes = binary.iter().filter(|r| r.sentiment == Sentiment::Like).count();
    let p = ratio(likes as u64, binary.len() as u64);
    let descriptive: Vec<EntityId> = graph
        .entities()
        .iter()
        .filter(|e| !e.recommendable)
        .map(|e| e.id)
        .collect();

    let prop = LabelPropagator::new(graph);
    let users: Vec<_> = store.users().collect();
    let outcomes: Vec<Option<UserOutcome>> = par::map(&users, |&u| {
        let rs = store.user_ratings(u);
        let seeds: Vec<_> = rs
            .iter()
            .filter(|r| r.sentiment.is_binary() && graph.is_recommendable(r.entity))
            .map(|r| (r.entity, r.sentiment))
            .collect();
        let targets: Vec<_> = rs
            .iter()
            .filter(|r| r.sentiment.is_binary() && !graph.is_recommendable(r.entity))
            .collect();
        if seeds.is_empty() || targets.is_empty() {
            return None;
        }
        let f = prop.propagate(&seeds, iters);
        let mut confusion = Confusion::default();
        for r in &targets {
            confusion.add(r.sentiment, f.label(r.entity));
        }
        let predicted_likes = descriptive
            .iter()
            .filter(|&&e| f.label(e) == Sentiment::Like)
            .count() as u64;
        Some(UserOutcome {
            truths: targets.iter().map(|r| r.sentiment).collect(),
            confusion,
            predicted_likes,
            predicted_dislikes: descriptive.len() as u64 - predicted_likes,
        })
    });
    let outcomes: Vec<UserOutcome> = outcomes.into_iter().flatten().collect();
    if outcomes.is_empty() {
        return Err(Error::EmptyUserSet);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = Confusion::default();
    let mut propagation = Confusion::default();
    for o in &outcomes {
        propagation = propagation.merge(o.confusion);
        for &t in &o.truths {
            let guess = if rng.random::<f64>() < p {
                Sentiment::Like
            } else {
                Sentiment::Dislike
            };
            random.add(t, guess);
        }
    }
    let q = ratio(propagation.tp + propagation.fn_, propagation.total());
    let n = outcomes.len() as f64;
    Ok(LabelPropagationReport {
        users: outcomes.len(),
        iters,
        propagation,
        random,
        like_probability: p,
        random_expected_accuracy: p * q + (1.0 - p) * (1.0 - q),
        mean_predicted_likes: outcomes.iter().map(|o| o.predicted_likes as f64).sum::<f64>() / n,
        mean_predicted_dislikes: outcomes
            .iter()
            .map(|o| o.predicted_dislikes as f64)
            .sum::<f64>()
            / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::store_from;
    use crate::dataset::Variant;
    use crate::kg::tests::small_graph;

    #[test]
    fn one_hop_like_reaches_genre() {
        let g = small_graph();
        let m0 = g.lookup("m0").unwrap();
        let f = label_propagate(&g, &[(m0, Sentiment::Like)], 1);
        let drama = g.lookup("g:drama").unwrap();
        assert!(f.scores[drama.index()] > 0.0);
        assert_eq!(f.label(drama), Sentiment::Like);
        assert_eq!(f.scores[m0.index()], 1.0);
    }

    #[test]
    fn balanced_neighbourhood_thresholds_to_like() {
        let g = small_graph();
        let e = |u| g.lookup(u).unwrap();
        // m2 sits between drama and action; symmetric seeds cancel at m2.
        let f = label_propagate(&g, &[(e("g:drama"), Sentiment::Like), (e("g:action"), Sentiment::Dislike)], 1);
        assert_eq!(f.scores[e("m2").index()], 0.0);
        assert_eq!(f.label(e("m2")), Sentiment::Like);
    }

    #[test]
    fn report_counts_are_consistent() {
        let g = small_graph();
        let s = store_from(
            &g,
            Variant::Binary,
            &[
                ("a", "m0", 1),
                ("a", "m1", 1),
                ("a", "g:drama", 1),
                ("a", "g:action", -1),
                ("b", "m3", -1),
                ("b", "g:action", -1),
                ("c", "g:drama", 1),
            ],
        );
        let r = evaluate_label_propagation(&s, &g, 10, 0).unwrap();
        assert_eq!(r.users, 2);
        assert_eq!(r.propagation.total(), 3);
        assert_eq!(r.random.total(), 3);
        assert!((r.like_probability - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.mean_predicted_likes + r.mean_predicted_dislikes, 3.0);
        let m = r.propagation.macro_avg();
        assert!((0.0..=1.0).contains(&m.f1));
    }
}
