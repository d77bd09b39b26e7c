//! Actor-critic MLP with A2C and PPO-clip learners over lockstep rollouts.

mod advantage;
mod checkpoint;
mod loss;
mod network;
mod optim;
mod train;


pub use advantage::{compute_advantages, standardize, AdvantageMode};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use loss::{clipped_surrogate, loss_and_grad, Batch, LossCoefs, LossStats, Objective};
pub use network::{log_softmax, orthogonal_matrix, softmax, ActorCritic, ForwardCache, NetConfig};
pub use optim::Adam;
pub use train::{
    act, evaluate, training_log_header, write_training_log, Algorithm, EnvRotation, LearnerConfig, RlEnv, TrainLogRow,
    Trainer,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("rollout ended without a bootstrap value")]
    MissingBootstrap,
    #[error("invalid learner config: {0}")]
    Config(String),
    #[error("environment: {0}")]
    Env(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<crate::env::EnvError> for AgentError {
    fn from(e: crate::env::EnvError) -> Self {
        AgentError::Env(e.to_string())
    }
}
