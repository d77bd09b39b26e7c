//! Command-line harness for the market-making simulator: synthetic data,
//! validation, segmentation, training, backtesting, benchmark and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod report;
pub mod run;

use thiserror::Error;

use lobmm_core::agent::AgentError;
use lobmm_core::env::EnvError;
use lobmm_core::features::FeatureError;
use lobmm_core::market_data::DataError;
use lobmm_core::rewards::UnknownReward;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Reward(#[from] UnknownReward),
}
