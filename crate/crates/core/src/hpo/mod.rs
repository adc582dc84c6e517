//! Sequential model-based search over network architectures.

mod forest;
mod objective;
mod search;
mod space;

pub use forest::{expected_improvement, Forest};
pub use objective::{contiguous_folds, describe_incumbent, ArchitectureObjective, DEFAULT_TIME_BUDGET_S};
pub use search::{
    history_to_text, parse_history, random_search, run_trial, smbo_search, SearchResult, SmboConfig, Trial, TrialStatus,
};
pub use space::{architecture_from_flat, architecture_space, ConfigSpace, Domain, HyperParam, Point};
