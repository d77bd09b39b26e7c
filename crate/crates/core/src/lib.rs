//! Limit order book market-making simulation with time- and price-based
//! event environments, seven reward functions, and actor-critic agents.
//!
//! Modules, bottom-up:
//!
//! - [`market_data`]: snapshot days, CSV ingestion, synthesis, z-score normalization
//! - [`features`]: environment and agent state features, observation windows
//! - [`exchange`]: action decoding, queue-priority fills, fees, FIFO netting, slippage
//! - [`rewards`]: the reward functions over a per-snapshot context
//! - [`env`]: episodic time-event and price-event environments
//! - [`agent`]: MLP actor-critic with A2C and PPO learners

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod env;
pub mod exchange;
pub mod features;
pub mod market_data;
pub mod rewards;
