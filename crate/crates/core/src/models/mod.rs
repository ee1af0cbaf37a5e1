//! Recommenders behind one [`Recommender`] contract.
//!
//! Every model is fitted on a binary rating store (likes and dislikes over both
//! movies and descriptive entities) and ranks candidate movies for a user.
//! Ties in score are broken by entity uri so rankings are fully deterministic.

pub mod checkpoint;
mod knn;
mod label_prop;
mod matrix;
mod mf;
mod bpr;
mod ppr;
mod toppop;
mod trans;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::{RatingStore, UserId};
use crate::kg::{EntityId, KnowledgeGraph, PageRankConfig};
use crate::{Error, Result};

pub use bpr::{bpr_triple_grad, bpr_triple_loss, BprConfig, BprModel};
pub use knn::{cosine, ItemKnn, UserKnn};
pub use label_prop::{
    evaluate_label_propagation, label_propagate, Confusion, LabelMetrics, LabelPropagationReport,
    LabelPropagator, LabelScores,
};
pub use matrix::Matrix;
pub use mf::{MfConfig, MfModel};
pub use ppr::{GraphMode, GraphView, PprModel};
pub use toppop::TopPop;
pub use trans::{
    margin_loss, margin_loss_grad, project, translation_distance, MarginGrad, TransConfig,
    TransKind, TransModel,
};

/// A fitted recommender. Fitted models are immutable and shareable.
pub trait Recommender: Send + Sync {
    fn name(&self) -> String;

    fn score(&self, user: UserId, entity: EntityId) -> f64;

    /// Scores for many entities at once; models with per-user setup cost
    /// (random walks) override this.
    fn score_many(&self, user: UserId, entities: &[EntityId]) -> Vec<f64> {
        entities.iter().map(|&e| self.score(user, e)).collect()
    }

    /// False when the model has nothing to go on for `user`; such users get an
    /// empty ranking.
    fn can_rank(&self, _user: UserId) -> bool {
        true
    }
}

/// Orders `candidates` by score descending, then uri ascending, and keeps `k`.
/// NaN scores sort last.
pub fn rank_by_scores(
    graph: &KnowledgeGraph,
    candidates: &[EntityId],
    scores: &[f64],
    k: usize,
) -> Vec<EntityId> {
    debug_assert_eq!(candidates.len(), scores.len());
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (scores[a], scores[b]);
        let by_score = match (sa.is_nan(), sb.is_nan()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => sb.total_cmp(&sa),
        };
        by_score.then_with(|| graph.uri(candidates[a]).cmp(graph.uri(candidates[b])))
    });
    order.truncate(k);
    order.into_iter().map(|i| candidates[i]).collect()
}

/// Top-`k` of `candidates` for `user`.
pub fn rank(
    model: &dyn Recommender,
    graph: &KnowledgeGraph,
    user: UserId,
    candidates: &[EntityId],
    k: usize,
) -> Vec<EntityId> {
    if !model.can_rank(user) {
        return Vec::new();
    }
    let scores = model.score_many(user, candidates);
    rank_by_scores(graph, candidates, &scores, k)
}

/// Declarative model choice with hyperparameters, as found in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", deny_unknown_fields)]
pub enum ModelSpec {
    TopPop {},
    #[serde(rename = "MF")]
    Mf(MfConfig),
    #[serde(rename = "BPR")]
    Bpr(BprConfig),
    UserKnn {
        #[serde(default = "default_k")]
        k: usize,
    },
    ItemKnn {
        #[serde(default = "default_k")]
        k: usize,
    },
    TransE(TransConfig),
    TransH(TransConfig),
    #[serde(rename = "PPR")]
    Ppr {
        mode: GraphMode,
        #[serde(default)]
        pagerank: PageRankConfig,
    },
}

fn default_k() -> usize {
    20
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::TopPop {} => "TopPop".into(),
            ModelSpec::Mf(_) => "MF".into(),
            ModelSpec::Bpr(_) => "BPR".into(),
            ModelSpec::UserKnn { .. } => "User kNN".into(),
            ModelSpec::ItemKnn { .. } => "Item kNN".into(),
            ModelSpec::TransE(c) => if c.kg { "TransE-KG" } else { "TransE" }.into(),
            ModelSpec::TransH(c) => if c.kg { "TransH-KG" } else { "TransH" }.into(),
            ModelSpec::Ppr { mode, .. } => format!("PPR-{}", mode.as_str()),
        }
    }

    /// Parses a display name such as `"Item kNN"` or `"TransH-KG"` into a spec
    /// with default hyperparameters.
    pub fn from_name(name: &str) -> Result<ModelSpec> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let kg = |on| TransConfig {
            kg: on,
            ..TransConfig::default()
        };
        let ppr = |mode| ModelSpec::Ppr {
            mode,
            pagerank: PageRankConfig::default(),
        };
        Ok(match key.as_str() {
            "toppop" => ModelSpec::TopPop {},
            "mf" => ModelSpec::Mf(MfConfig::default()),
            "bpr" => ModelSpec::Bpr(BprConfig::default()),
            "userknn" => ModelSpec::UserKnn { k: default_k() },
            "itemknn" => ModelSpec::ItemKnn { k: default_k() },
            "transe" => ModelSpec::TransE(kg(false)),
            "transekg" => ModelSpec::TransE(kg(true)),
            "transh" => ModelSpec::TransH(kg(false)),
            "transhkg" => ModelSpec::TransH(kg(true)),
            "pprkg" => ppr(GraphMode::Kg),
            "pprcollab" => ppr(GraphMode::Collab),
            "pprjoint" => ppr(GraphMode::Joint),
            _ => return Err(Error::InvalidArgument(format!("unknown model `{name}`"))),
        })
    }

    /// The twelve models compared in the add / substitute / remove experiments.
    pub fn standard_zoo() -> Vec<ModelSpec> {
        [
            "TopPop",
            "MF",
            "BPR",
            "User kNN",
            "Item kNN",
            "TransE",
            "TransE-KG",
            "TransH",
            "TransH-KG",
            "PPR-KG",
            "PPR-COLLAB",
            "PPR-JOINT",
        ]
        .iter()
        .map(|n| ModelSpec::from_name(n).expect("known model"))
        .collect()
    }

    pub fn fit(
        &self,
        train: &RatingStore,
        graph: &KnowledgeGraph,
        seed: u64,
    ) -> Result<Box<dyn Recommender>> {
        Ok(match self {
            ModelSpec::TopPop {} => Box::new(TopPop::fit(train)),
            ModelSpec::Mf(c) => Box::new(MfModel::fit(train, graph.len(), c, seed)?),
            ModelSpec::Bpr(c) => Box::new(BprModel::fit(train, graph, c, seed)?),
            ModelSpec::UserKnn { k } => Box::new(UserKnn::fit(train, *k)),
            ModelSpec::ItemKnn { k } => Box::new(ItemKnn::fit(train, *k)),
            ModelSpec::TransE(c) => Box::new(TransModel::fit(train, graph, TransKind::E, c, seed)?),
            ModelSpec::TransH(c) => Box::new(TransModel::fit(train, graph, TransKind::H, c, seed)?),
            ModelSpec::Ppr { mode, pagerank } => Box::new(PprModel::fit(train, graph, *mode, *pagerank)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::tests::small_graph;

    struct Fixed(Vec<f64>);

    impl Recommender for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn score(&self, _: UserId, e: EntityId) -> f64 {
            self.0[e.index()]
        }
    }

    #[test]
    fn ties_break_by_uri() {
        let g = small_graph();
        let m = |u: &str| g.lookup(u).unwrap();
        let model = Fixed(vec![1.0, 2.0, 2.0, f64::NAN, 1.0, 0.0, 0.0, 0.0]);
        let cands = [m("m4"), m("m3"), m("m2"), m("m1"), m("m0")];
        assert_eq!(
            rank(&model, &g, UserId(0), &cands, 10),
            vec![m("m1"), m("m2"), m("m0"), m("m4"), m("m3")]
        );
        assert_eq!(rank(&model, &g, UserId(0), &cands, 2), vec![m("m1"), m("m2")]);
    }

    #[test]
    fn names_round_trip() {
        let zoo = ModelSpec::standard_zoo();
        assert_eq!(zoo.len(), 12);
        for spec in &zoo {
            assert_eq!(&ModelSpec::from_name(&spec.name()).unwrap(), spec);
        }
        assert!(ModelSpec::from_name("GPT").is_err());
    }

    #[test]
    fn spec_deserializes_from_toml_like_json() {
        let spec: ModelSpec =
            serde_json::from_str(r#"{"model":"TransH","kg":true,"dim":8}"#).unwrap();
        assert_eq!(spec.name(), "TransH-KG");
        assert!(serde_json::from_str::<ModelSpec>(r#"{"model":"TopPop","k":3}"#).is_err());
    }
}
