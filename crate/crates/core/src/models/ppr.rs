//! Personalised PageRank recommenders seeded with a user's likes.

use serde::{Deserialize, Serialize};

use super::Recommender;
use crate::dataset::{RatingStore, Sentiment, UserId};
use crate::kg::pagerank::{personalized_pagerank, PageRankScores, TransitionGraph};
use crate::kg::{EntityId, KnowledgeGraph, PageRankConfig};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GraphMode {
    /// Graph edges only.
    Kg,
    /// User to rated-entity edges only.
    Collab,
    /// Both edge sets.
    Joint,
}

impl GraphMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphMode::Kg => "KG",
            GraphMode::Collab => "COLLAB",
            GraphMode::Joint => "JOINT",
        }
    }
}

/// Undirected unit-weight random-walk graph. Entity ids are node indices;
/// in COLLAB and JOINT mode users follow as nodes `entity_count + user`.
#[derive(Clone, Debug)]
pub struct GraphView {
    pub mode: GraphMode,
    pub entity_count: usize,
    pub transitions: TransitionGraph,
}

impl GraphView {
    pub fn build(mode: GraphMode, graph: &KnowledgeGraph, train: &RatingStore) -> GraphView {
        let n_ent = graph.len();
        let mut pairs = Vec::new();
        if mode != GraphMode::Collab {
            pairs.extend(graph.undirected_pairs());
        }
        let mut n = n_ent;
        if mode != GraphMode::Kg {
            n += train.user_vocab_len();
            pairs.extend(
                train
                    .ratings()
                    .iter()
                    .filter(|r| r.sentiment.is_binary())
                    .map(|r| (r.entity.0, (n_ent + r.user.index()) as u32)),
            );
        }
        GraphView {
            mode,
            entity_count: n_ent,
            transitions: TransitionGraph::undirected(n, &pairs),
        }
    }

    pub fn node_count(&self) -> usize {
        self.transitions.node_count()
    }
}

#[derive(Clone, Debug)]
pub struct PprModel {
    view: GraphView,
    liked: Vec<Vec<u32>>,
    pagerank: PageRankConfig,
}

impl PprModel {
    pub fn fit(
        train: &RatingStore,
        graph: &KnowledgeGraph,
        mode: GraphMode,
        pagerank: PageRankConfig,
    ) -> Result<Self> {
        pagerank.validate()?;
        let liked = (0..train.user_vocab_len())
            .map(|u| {
                train
                    .user_ratings(UserId(u as u32))
                    .iter()
                    .filter(|r| r.sentiment == Sentiment::Like)
                    .map(|r| r.entity.0)
                    .collect()
            })
            .collect();
        Ok(PprModel {
            view: GraphView::build(mode, graph, train),
            liked,
            pagerank,
        })
    }

    pub fn view(&self) -> &GraphView {
        &self.view
    }

    /// Full score vector over the view's nodes for `user`.
    pub fn scores_for(&self, user: UserId) -> Result<PageRankScores> {
        let seeds = self.liked.get(user.index()).map_or(&[][..], |v| v.as_slice());
        personalized_pagerank(&self.view.transitions, seeds, &self.pagerank)
    }
}

impl Recommender for PprModel {
    fn name(&self) -> String {
        format!("PPR-{}", self.view.mode.as_str())
    }

    fn score(&self, user: UserId, entity: EntityId) -> f64 {
        self.score_many(user, &[entity])[0]
    }

    fn score_many(&self, user: UserId, entities: &[EntityId]) -> Vec<f64> {
        match self.scores_for(user) {
            Ok(s) => entities.iter().map(|&e| s.get(e)).collect(),
            Err(_) => vec![0.0; entities.len()],
        }
    }

    fn can_rank(&self, user: UserId) -> bool {
        self.liked.get(user.index()).is_some_and(|v| !v.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::store_from;
    use crate::dataset::Variant;
    use crate::kg::tests::small_graph;
    use crate::models::rank;

    #[test]
    fn no_likes_gives_empty_ranking() {
        let g = small_graph();
        let s = store_from(&g, Variant::Binary, &[("a", "m0", -1), ("b", "m1", 1)]);
        let m = PprModel::fit(&s, &g, GraphMode::Kg, PageRankConfig::default()).unwrap();
        let a = s.lookup_user("a").unwrap();
        assert!(rank(&m, &g, a, &g.recommendables(), 3).is_empty());
        let b = s.lookup_user("b").unwrap();
        assert_eq!(rank(&m, &g, b, &g.recommendables(), 3).len(), 3);
    }

    #[test]
    fn kg_mode_ignores_other_users() {
        let g = small_graph();
        let rows = [("a", "m0", 1), ("b", "m0", 1), ("b", "m4", 1)];
        let s1 = store_from(&g, Variant::Binary, &rows);
        let s2 = store_from(&g, Variant::Binary, &rows[..1]);
        let a = s1.lookup_user("a").unwrap();
        let cands = g.recommendables();
        let m1 = PprModel::fit(&s1, &g, GraphMode::Kg, PageRankConfig::default()).unwrap();
        let m2 = PprModel::fit(&s2, &g, GraphMode::Kg, PageRankConfig::default()).unwrap();
        assert_eq!(m1.score_many(a, &cands), m2.score_many(a, &cands));
        let c1 = PprModel::fit(&s1, &g, GraphMode::Collab, PageRankConfig::default()).unwrap();
        let c2 = PprModel::fit(&s2, &g, GraphMode::Collab, PageRankConfig::default()).unwrap();
        assert_ne!(c1.score_many(a, &cands), c2.score_many(a, &cands));
    }

    #[test]
    fn views_have_expected_sizes() {
        let g = small_graph();
        let s = store_from(&g, Variant::Binary, &[("a", "m0", 1), ("b", "m1", -1)]);
        assert_eq!(GraphView::build(GraphMode::Kg, &g, &s).node_count(), g.len());
        assert_eq!(GraphView::build(GraphMode::Collab, &g, &s).node_count(), g.len() + 2);
        assert_eq!(GraphView::build(GraphMode::Joint, &g, &s).node_count(), g.len() + 2);
    }
}
