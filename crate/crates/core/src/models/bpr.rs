//! Bayesian personalised ranking with stochastic gradient descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use super::Recommender;
use crate::dataset::{RatingStore, Sentiment, UserId};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BprConfig {
    pub dim: usize,
    pub lr: f64,
    pub reg: f64,
    pub epochs: usize,
    pub init_std: f64,
    /// Chance that a negative is one of the user's explicit dislikes, when
    /// the user has any.
    pub dislike_negative_rate: f64,
}

impl Default for BprConfig {
    fn default() -> Self {
        BprConfig {
            dim: 32,
            lr: 0.05,
            reg: 0.01,
            epochs: 30,
            init_std: 0.1,
            dislike_negative_rate: 0.5,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(p . (qi - qj)) + reg * (|p|^2 + |qi|^2 + |qj|^2)`.
pub fn bpr_triple_loss(p: &[f64], qi: &[f64], qj: &[f64], reg: f64) -> f64 {
    let x = dot(p, qi) - dot(p, qj);
    // ln(1 + e^-x) evaluated without overflow.
    let nll = if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    };
    nll + reg * (dot(p, p) + dot(qi, qi) + dot(qj, qj))
}

/// Gradients of [`bpr_triple_loss`] with respect to `p`, `qi` and `qj`.
pub fn bpr_triple_grad(
    p: &[f64],
    qi: &[f64],
    qj: &[f64],
    reg: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x = dot(p, qi) - dot(p, qj);
    let g = -sigmoid(-x);
    let gp = (0..p.len())
        .map(|k| g * (qi[k] - qj[k]) + 2.0 * reg * p[k])
        .collect();
    let gi = (0..p.len()).map(|k| g * p[k] + 2.0 * reg * qi[k]).collect();
    let gj = (0..p.len()).map(|k| -g * p[k] + 2.0 * reg * qj[k]).collect();
    (gp, gi, gj)
}

#[derive(Clone, Debug)]
pub struct BprModel {
    pub users: Matrix,
    pub items: Matrix,
    /// Mean triple loss per epoch.
    pub loss_trace: Vec<f64>,
}

struct UserSamples {
    user: UserId,
    liked: Vec<EntityId>,
    disliked: Vec<EntityId>,
}

impl BprModel {
    pub fn fit(train: &RatingStore, graph: &KnowledgeGraph, cfg: &BprConfig, seed: u64) -> Result<Self> {
        if cfg.dim == 0 {
            return Err(Error::InvalidArgument("dim must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut users = Matrix::normal(train.user_vocab_len(), cfg.dim, cfg.init_std, &mut rng);
        let mut items = Matrix::normal(graph.len(), cfg.dim, cfg.init_std, &mut rng);
        let recommendables = graph.recommendables();

        // Users without likes contribute no triples.
        let samples: Vec<UserSamples> = train
            .users()
            .filter_map(|u| {
                let rs = train.user_ratings(u);
                let pick = |s| rs.iter().filter(|r| r.sentiment == s).map(|r| r.entity).collect::<Vec<_>>();
                let liked = pick(Sentiment::Like);
                (!liked.is_empty()).then(|| UserSamples {
                    user: u,
                    liked,
                    disliked: pick(Sentiment::Dislike),
                })
            })
            .collect();
        let steps_per_epoch: usize = samples.iter().map(|s| s.liked.len()).sum();
        let mut loss_trace = Vec::with_capacity(cfg.epochs);

        for _ in 0..cfg.epochs {
            let mut total = 0.0;
            let mut steps = 0usize;
            for _ in 0..steps_per_epoch {
                let s = &samples[rng.random_range(0..samples.len())];
                let i = s.liked[rng.random_range(0..s.liked.len())];
                let Some(j) = draw_negative(train, s, &recommendables, cfg.dislike_negative_rate, &mut rng)
                else {
                    continue;
                };
                let (u, ii, jj) = (s.user.index(), i.index(), j.index());
                let (p, qi, qj) = (users.row(u), items.row(ii), items.row(jj));
                total += bpr_triple_loss(p, qi, qj, cfg.reg);
                steps += 1;
                let (gp, gi, gj) = bpr_triple_grad(p, qi, qj, cfg.reg);
                for (x, g) in users.row_mut(u).iter_mut().zip(&gp) {
                    *x -= cfg.lr * g;
                }
                for (x, g) in items.row_mut(ii).iter_mut().zip(&gi) {
                    *x -= cfg.lr * g;
                }
                for (x, g) in items.row_mut(jj).iter_mut().zip(&gj) {
                    *x -= cfg.lr * g;
                }
            }
            loss_trace.push(if steps == 0 { 0.0 } else { total / steps as f64 });
        }
        Ok(BprModel {
            users,
            items,
            loss_trace,
        })
    }
}

fn draw_negative(
    train: &RatingStore,
    s: &UserSamples,
    recommendables: &[EntityId],
    dislike_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Option<EntityId> {
    if !s.disliked.is_empty() && rng.random::<f64>() < dislike_rate {
        return Some(s.disliked[rng.random_range(0..s.disliked.len())]);
    }
    if !recommendables.is_empty() {
        for _ in 0..64 {
            let e = recommendables[rng.random_range(0..recommendables.len())];
            if train.sentiment(s.user, e).is_none() {
                return Some(e);
            }
        }
    }
    // Every probe hit a rated entity; fall back to explicit dislikes.
    (!s.disliked.is_empty()).then(|| s.disliked[rng.random_range(0..s.disliked.len())])
}

impl Recommender for BprModel {
    fn name(&self) -> String {
        "BPR".into()
    }

    fn score(&self, user: UserId, entity: EntityId) -> f64 {
        if user.index() >= self.users.rows() || entity.index() >= self.items.rows() {
            return 0.0;
        }
        dot(self.users.row(user.index()), self.items.row(entity.index()))
    }
}
