//! Matrix factorization fitted by alternating least squares.
//!
//! Minimises `sum (r - p_u . q_e)^2 + reg * (|P|^2 + |Q|^2)` over observed
//! ratings with `r = +1` for likes and `-1` for dislikes. Each half-sweep
//! solves every user (or entity) row exactly, so the objective never increases.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use super::Recommender;
use crate::dataset::{RatingStore, UserId};
use crate::kg::EntityId;
use crate::{par, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfConfig {
    pub dim: usize,
    pub reg: f64,
    pub epochs: usize,
    pub init_std: f64,
}

impl Default for MfConfig {
    fn default() -> Self {
        MfConfig {
            dim: 32,
            reg: 0.1,
            epochs: 20,
            init_std: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MfModel {
    pub users: Matrix,
    pub items: Matrix,
    /// Objective after initialisation and after every half-sweep.
    pub objective_trace: Vec<f64>,
}

fn value(r: &crate::dataset::Rating) -> f64 {
    r.sentiment.value() as f64
}

impl MfModel {
    pub fn fit(train: &RatingStore, entity_count: usize, cfg: &MfConfig, seed: u64) -> Result<Self> {
        if cfg.dim == 0 {
            return Err(Error::InvalidArgument("dim must be at least 1".into()));
        }
        if cfg.reg < 0.0 {
            return Err(Error::InvalidArgument("reg must be non-negative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut users = Matrix::normal(train.user_vocab_len(), cfg.dim, cfg.init_std, &mut rng);
        let mut items = Matrix::normal(entity_count, cfg.dim, cfg.init_std, &mut rng);
        let mut trace = vec![objective(train, &users, &items, cfg.reg)];

        for _ in 0..cfg.epochs {
            users = solve_side(&items, cfg.reg, users.rows(), |u| {
                train
                    .user_ratings(UserId(u as u32))
                    .iter()
                    .map(|r| (r.entity.index(), value(r)))
                    .collect()
            })?;
            trace.push(objective(train, &users, &items, cfg.reg));
            items = solve_side(&users, cfg.reg, items.rows(), |e| {
                train
                    .entity_ratings(EntityId(e as u32))
                    .map(|r| (r.user.index(), value(r)))
                    .collect()
            })?;
            trace.push(objective(train, &users, &items, cfg.reg));
        }
        Ok(MfModel {
            users,
            items,
            objective_trace: trace,
        })
    }

    pub fn objective(&self, train: &RatingStore, reg: f64) -> f64 {
        objective(train, &self.users, &self.items, reg)
    }
}

/// Solves each row of the side being updated against the fixed side:
/// `(F_o^T F_o + reg I) x = F_o^T r_o` over the row's observations `o`.
fn solve_side(
    fixed: &Matrix,
    reg: f64,
    rows: usize,
    observations: impl Fn(usize) -> Vec<(usize, f64)> + Sync + Send,
) -> Result<Matrix> {
    let d = fixed.cols();
    let solved: Vec<Result<Vec<f64>>> = par::map_range(rows, |i| {
        let obs = observations(i);
        if obs.is_empty() {
            // Only the penalty depends on this row, so zero is the minimiser.
            return Ok(vec![0.0; d]);
        }
        let f = DMatrix::<f64>::from_fn(obs.len(), d, |i, k| fixed.row(obs[i].0)[k]);
        let y = DVector::<f64>::from_iterator(obs.len(), obs.iter().map(|o| o.1));
        let mut a = f.tr_mul(&f);
        for x in 0..d {
            a[(x, x)] += reg;
        }
        let b = f.tr_mul(&y);
        let chol = a.cholesky().ok_or_else(|| {
            Error::InvalidArgument("singular normal equations; use reg > 0".into())
        })?;
        Ok(chol.solve(&b).iter().copied().collect())
    });
    let mut out = Matrix::zeros(rows, d);
    for (i, row) in solved.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&row?);
    }
    Ok(out)
}

fn objective(train: &RatingStore, users: &Matrix, items: &Matrix, reg: f64) -> f64 {
    let loss: f64 = train
        .ratings()
        .iter()
        .map(|r| {
            let e = value(r) - dot(users.row(r.user.index()), items.row(r.entity.index()));
            e * e
        })
        .sum();
    loss + reg * (users.squared_norm() + items.squared_norm())
}

impl Recommender for MfModel {
    fn name(&self) -> String {
        "MF".into()
    }

    fn score(&self, user: UserId, entity: EntityId) -> f64 {
        if user.index() >= self.users.rows() || entity.index() >= self.items.rows() {
            return 0.0;
        }
        dot(self.users.row(user.index()), self.items.row(entity.index()))
    }
}
