use super::Recommender;
use crate::dataset::{RatingStore, UserId};
use crate::kg::EntityId;

/// Scores every entity by its number of binary ratings, regardless of user.
#[derive(Clone, Debug)]
pub struct TopPop {
    counts: Vec<u32>,
}

impl TopPop {
    pub fn fit(train: &RatingStore) -> Self {
        let counts = (0..train.entity_count())
            .map(|e| {
                train
                    .entity_ratings(EntityId(e as u32))
                    .filter(|r| r.sentiment.is_binary())
                    .count() as u32
            })
            .collect();
        TopPop { counts }
    }
}

impl Recommender for TopPop {
    fn name(&self) -> String {
        "TopPop".into()
    }

    fn score(&self, _user: UserId, entity: EntityId) -> f64 {
        self.counts.get(entity.index()).copied().unwrap_or(0) as f64
    }
}
