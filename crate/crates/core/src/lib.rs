//! Psycholinguistic norm estimates from a chat model's first-token
//! log-probabilities.
//!
//! Prompt a model for a Likert rating, read the top alternatives of its single
//! answer token, and turn them into a dominant rating, a probability-weighted
//! rating and rank columns. The analytics module compares such estimates with
//! human norms, and [`mock`] provides a deterministic stand-in endpoint so the
//! whole pipeline runs offline.

pub mod analytics;
pub mod cli;
pub mod client;
pub mod datasets;
pub mod estimator;
pub mod mock;
pub mod model;
pub mod pipeline;
pub mod prompts;
pub mod ranking;

pub use client::{
    extract_token_distribution, LlmClient, ModelConfig, RawCompletion, ResponseCache,
};
pub use estimator::{dominant_rating, estimate, expected_rating};
pub use model::{
    default_scale, CorrelationMatrix, EstimateTable, Expression, GoldNorms, NormEstimate,
    PairStats, RatingDistribution, ScaleSpec, Variable,
};
pub use prompts::{build_prompt, PromptText};

/// Any library error, tagged with the module it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("model: {0}")]
    Model(#[from] model::ModelError),
    #[error("prompts: {0}")]
    Prompt(#[from] prompts::PromptError),
    #[error("client: {0}")]
    Client(#[from] client::ClientError),
    #[error("estimator: {0}")]
    Estimate(#[from] estimator::EstimateError),
    #[error("analytics: {0}")]
    Stats(#[from] analytics::StatsError),
    #[error("ranking: {0}")]
    Rank(#[from] ranking::RankError),
    #[error("datasets: {0}")]
    Dataset(#[from] datasets::DatasetError),
    #[error("mock: {0}")]
    Mock(#[from] mock::MockError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
