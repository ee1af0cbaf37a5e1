//! Translational embeddings (TransE and TransH) over rating triples, optionally
//! joined with the knowledge graph.
//!
//! Users become extra nodes after the entities. Relation 0 is `LIKES`,
//! relation 1 is `DISLIKES`, and graph relations follow in graph order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm, Matrix};
use super::Recommender;
use crate::dataset::{RatingStore, Sentiment, UserId};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::{Error, Result};

pub const LIKES: usize = 0;
pub const DISLIKES: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransKind {
    E,
    H,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransConfig {
    /// Train on graph triples as well as rating triples.
    pub kg: bool,
    pub dim: usize,
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
}

impl Default for TransConfig {
    fn default() -> Self {
        TransConfig {
            kg: false,
            dim: 32,
            margin: 1.0,
            lr: 0.01,
            epochs: 50,
        }
    }
}

/// `x - (w . x) w`; `w` is assumed unit-norm.
pub fn project(x: &[f64], w: &[f64]) -> Vec<f64> {
    let s = dot(w, x);
    x.iter().zip(w).map(|(a, b)| a - s * b).collect()
}

/// `|h_p + r - t_p|` where `_p` is the projection onto the hyperplane with
/// normal `w` (identity when `w` is `None`).
pub fn translation_distance(h: &[f64], r: &[f64], t: &[f64], w: Option<&[f64]>) -> f64 {
    let d = h.len();
    let s = w.map_or(0.0, |w| (0..d).map(|k| (h[k] - t[k]) * w[k]).sum());
    (0..d)
        .map(|k| {
            let v = h[k] - t[k] + r[k] - w.map_or(0.0, |w| s * w[k]);
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// `max(0, margin + d(h, r, t) - d(h_neg, r, t_neg))`.
pub fn margin_loss(
    margin: f64,
    h: &[f64],
    r: &[f64],
    t: &[f64],
    h_neg: &[f64],
    t_neg: &[f64],
    w: Option<&[f64]>,
) -> f64 {
    (margin + translation_distance(h, r, t, w) - translation_distance(h_neg, r, t_neg, w)).max(0.0)
}

/// Gradient of [`margin_loss`]; all zero when the hinge is inactive.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginGrad {
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub h_neg: Vec<f64>,
    pub t_neg: Vec<f64>,
    pub w: Option<Vec<f64>>,
}

impl MarginGrad {
    fn zeros(d: usize, hyperplane: bool) -> Self {
        MarginGrad {
            h: vec![0.0; d],
            r: vec![0.0; d],
            t: vec![0.0; d],
            h_neg: vec![0.0; d],
            t_neg: vec![0.0; d],
            w: hyperplane.then(|| vec![0.0; d]),
        }
    }

    fn clear(&mut self) {
        for v in [&mut self.h, &mut self.r, &mut self.t, &mut self.h_neg, &mut self.t_neg] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        if let Some(w) = &mut self.w {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Distance and its gradient with respect to `h` (into `gh`), `r` (into
/// `gr`) and `w` (into `gw`). The gradient with respect to `t` is `-gh`.
fn distance_grad_into(
    h: &[f64],
    r: &[f64],
    t: &[f64],
    w: Option<&[f64]>,
    gh: &mut [f64],
    gr: &mut [f64],
    gw: Option<&mut [f64]>,
) -> f64 {
    let d = h.len();
    let s = w.map_or(0.0, |w| (0..d).map(|k| (h[k] - t[k]) * w[k]).sum());
    for k in 0..d {
        gr[k] = h[k] - t[k] + r[k] - w.map_or(0.0, |w| s * w[k]);
    }
    let n = norm(gr);
    if n > 0.0 {
        gr.iter_mut().for_each(|x| *x /= n);
    } else {
        gr.iter_mut().for_each(|x| *x = 0.0);
    }
    match (w, gw) {
        (Some(w), Some(gw)) => {
            let wg = dot(w, gr);
            for k in 0..d {
                gh[k] = gr[k] - wg * w[k];
                gw[k] = -wg * (h[k] - t[k]) - s * gr[k];
            }
        }
        _ => gh.copy_from_slice(gr),
    }
    n
}

/// Writes the gradient of [`margin_loss`] into `g` and returns the loss.
#[allow(clippy::too_many_arguments)]
fn margin_step(
    margin: f64,
    h: &[f64],
    r: &[f64],
    t: &[f64],
    h_neg: &[f64],
    t_neg: &[f64],
    w: Option<&[f64]>,
    g: &mut MarginGrad,
) -> f64 {
    let dp = distance_grad_into(h, r, t, w, &mut g.h, &mut g.r, g.w.as_deref_mut());
    // Negative-side gradients land in spare slots first: h-gradient in
    // `t_neg`, r-gradient in `t`, w-gradient in `h_neg`.
    let gw_neg = w.is_some().then_some(&mut g.h_neg[..]);
    let dn = distance_grad_into(h_neg, r, t_neg, w, &mut g.t_neg, &mut g.t, gw_neg);
    let loss = margin + dp - dn;
    if loss <= 0.0 {
        g.clear();
        return 0.0;
    }
    for k in 0..h.len() {
        g.r[k] -= g.t[k];
        if let Some(gw) = &mut g.w {
            gw[k] -= g.h_neg[k];
        }
        g.t[k] = -g.h[k];
        g.h_neg[k] = -g.t_neg[k];
    }
    loss
}

pub fn margin_loss_grad(
    margin: f64,
    h: &[f64],
    r: &[f64],
    t: &[f64],
    h_neg: &[f64],
    t_neg: &[f64],
    w: Option<&[f64]>,
) -> MarginGrad {
    let mut g = MarginGrad::zeros(h.len(), w.is_some());
    margin_step(margin, h, r, t, h_neg, t_neg, w, &mut g);
    g
}

#[derive(Clone, Copy, Debug)]
struct Triple {
    head: usize,
    relation: usize,
    tail: usize,
    /// Heads of rating triples are users; corrupted heads stay users.
    user_head: bool,
}

#[derive(Clone, Debug)]
pub struct TransModel {
    pub kind: TransKind,
    pub kg: bool,
    pub entity_count: usize,
    /// Entity rows followed by user rows.
    pub nodes: Matrix,
    pub relations: Matrix,
    /// Unit hyperplane normals per relation; TransH only.
    pub normals: Option<Matrix>,
    /// Mean hinge loss per epoch.
    pub loss_trace: Vec<f64>,
}

impl TransModel {
    pub fn fit(
        train: &RatingStore,
        graph: &KnowledgeGraph,
        kind: TransKind,
        cfg: &TransConfig,
        seed: u64,
    ) -> Result<Self> {
        if cfg.dim == 0 {
            return Err(Error::InvalidArgument("dim must be at least 1".into()));
        }
        let n_ent = graph.len();
        let n_users = train.user_vocab_len();
        let mut triples: Vec<Triple> = train
            .ratings()
            .iter()
            .filter(|r| r.sentiment.is_binary())
            .map(|r| Triple {
                head: n_ent + r.user.index(),
                relation: if r.sentiment == Sentiment::Like { LIKES } else { DISLIKES },
                tail: r.entity.index(),
                user_head: true,
            })
            .collect();
        if cfg.kg {
            triples.extend(graph.edges().iter().map(|e| Triple {
                head: e.head.index(),
                relation: 2 + e.relation.0 as usize,
                tail: e.tail.index(),
                user_head: false,
            }));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 6.0 / (cfg.dim as f64).sqrt();
        let mut nodes = Matrix::uniform(n_ent + n_users, cfg.dim, bound, &mut rng);
        nodes.clip_row_norms(1.0);
        let n_rel = 2 + graph.relations().len();
        let mut relations = Matrix::uniform(n_rel, cfg.dim, bound, &mut rng);
        relations.normalize_rows();
        let mut normals = match kind {
            TransKind::E => None,
            TransKind::H => {
                let mut w = Matrix::uniform(n_rel, cfg.dim, 1.0, &mut rng);
                w.normalize_rows();
                Some(w)
            }
        };

        let mut model = TransModel {
            kind,
            kg: cfg.kg,
            entity_count: n_ent,
            nodes: Matrix::zeros(0, cfg.dim),
            relations: Matrix::zeros(0, cfg.dim),
            normals: None,
            loss_trace: Vec::with_capacity(cfg.epochs),
        };
        let mut scratch = Scratch {
            grad: MarginGrad::zeros(cfg.dim, normals.is_some()),
            normal: vec![0.0; cfg.dim],
        };
        let mut order: Vec<usize> = (0..triples.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for &i in &order {
                let tr = triples[i];
                let (mut h2, mut t2) = (tr.head, tr.tail);
                if rng.random::<f64>() < 0.5 {
                    h2 = if tr.user_head {
                        n_ent + rng.random_range(0..n_users)
                    } else {
                        rng.random_range(0..n_ent)
                    };
                } else {
                    t2 = rng.random_range(0..n_ent);
                }
                total += sgd_step(&mut nodes, &mut relations, normals.as_mut(), tr, h2, t2, cfg, &mut scratch);
            }
            nodes.clip_row_norms(1.0);
            model
                .loss_trace
                .push(if triples.is_empty() { 0.0 } else { total / triples.len() as f64 });
        }
        model.nodes = nodes;
        model.relations = relations;
        model.normals = normals;
        Ok(model)
    }

    fn normal(&self, relation: usize) -> Option<&[f64]> {
        self.normals.as_ref().map(|w| w.row(relation))
    }

    pub fn user_row(&self, user: UserId) -> Option<&[f64]> {
        let i = self.entity_count + user.index();
        (i < self.nodes.rows()).then(|| self.nodes.row(i))
    }
}

struct Scratch {
    grad: MarginGrad,
    normal: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn sgd_step(
    nodes: &mut Matrix,
    relations: &mut Matrix,
    normals: Option<&mut Matrix>,
    tr: Triple,
    h2: usize,
    t2: usize,
    cfg: &TransConfig,
    scratch: &mut Scratch,
) -> f64 {
    if let Some(n) = &normals {
        scratch.normal.copy_from_slice(n.row(tr.relation));
    }
    let w = normals.is_some().then_some(&scratch.normal[..]);
    let g = &mut scratch.grad;
    let loss = margin_step(
        cfg.margin,
        nodes.row(tr.head),
        relations.row(tr.relation),
        nodes.row(tr.tail),
        nodes.row(h2),
        nodes.row(t2),
        w,
        g,
    );
    if loss <= 0.0 {
        return 0.0;
    }
    let lr = cfg.lr;
    let apply = |row: &mut [f64], grad: &[f64]| {
        for (x, d) in row.iter_mut().zip(grad) {
            *x -= lr * d;
        }
    };
    apply(nodes.row_mut(tr.head), &g.h);
    apply(nodes.row_mut(tr.tail), &g.t);
    apply(nodes.row_mut(h2), &g.h_neg);
    apply(nodes.row_mut(t2), &g.t_neg);
    apply(relations.row_mut(tr.relation), &g.r);
    if let (Some(normals), Some(gw)) = (normals, g.w.as_ref()) {
        let row = normals.row_mut(tr.relation);
        apply(row, gw);
        let n = norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
    loss
}

impl Recommender for TransModel {
    fn name(&self) -> String {
        let base = match self.kind {
            TransKind::E => "TransE",
            TransKind::H => "TransH",
        };
        if self.kg {
            format!("{base}-KG")
        } else {
            base.into()
        }
    }

    fn score(&self, user: UserId, entity: EntityId) -> f64 {
        match self.user_row(user) {
            Some(p) if entity.index() < self.entity_count => -translation_distance(
                p,
                self.relations.row(LIKES),
                self.nodes.row(entity.index()),
                self.normal(LIKES),
            ),
            _ => f64::NEG_INFINITY,
        }
    }
}
