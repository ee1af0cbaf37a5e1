//! Leave-one-out evaluation, training-data recipes, and significance tests.

mod experiment;
mod metrics;
mod split;
mod stats;

pub use experiment::{
    evaluate, run_experiment, Cell, ExperimentPlan, ExperimentResult, Metric, Metrics, Summary,
};
pub use metrics::{hit_rate_at_k, mean_ndcg_at_k, ndcg_at_k};
pub use split::{
    build_experiment_store, build_loo, popular_entities, LooCase, LooConfig, LooSplit, Setting,
    QUARTERS,
};
pub use stats::{mean, paired_t_test, std_dev, TTest, SIGNIFICANCE_LEVEL};
