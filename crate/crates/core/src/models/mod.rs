//! Random forest and gradient-boosted trees with native categorical splits.

pub mod booster;
pub mod encode;
pub mod ensemble;
pub mod forest;
pub mod tree;

pub use booster::{sigmoid, train_booster, Booster, BoosterConfig};
pub use encode::{Binned, CategoryDict, Dataset, Encoder, UNSEEN};
pub use ensemble::{
    aggregate_importances, combine, min_max, AggregatedImportance, ImportanceReport, ModelConfig, Prediction,
    TreeEnsemblePair,
};
pub use forest::{train_forest, Forest, ForestConfig};
pub use tree::{Node, SplitRule, Tree};
