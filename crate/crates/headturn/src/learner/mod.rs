//! Recurrent Q-learning: GRU stack with backpropagation through time, Huber
//! TD loss against a soft-updated target network, deviation-keyed replay and
//! an AdamW optimizer, all over flat parameter vectors.

pub mod adam;
pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod params;
pub mod policy;
pub mod replay;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("replay buffer is empty")]
    EmptyReplay,
    #[error("bad network config: {0}")]
    BadConfig(String),
}
