//! Run orchestration: configs, training loop, checkpoints, the evaluation
//! protocol, and report files. The CLI in `main.rs` is a thin shell over
//! this module.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod report;
pub mod trainer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric: {0}")]
    Numeric(String),
}

impl HarnessError {
    /// CLI exit code: 1 config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Data(_) => 2,
            HarnessError::Numeric(_) => 3,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<crate::corpus::CorpusError> for HarnessError {
    fn from(e: crate::corpus::CorpusError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<crate::env::EnvError> for HarnessError {
    fn from(e: crate::env::EnvError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<crate::audio::AudioError> for HarnessError {
    fn from(e: crate::audio::AudioError) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<crate::learner::LearnerError> for HarnessError {
    fn from(e: crate::learner::LearnerError) -> Self {
        match e {
            crate::learner::LearnerError::BadConfig(m) => HarnessError::Config(m),
            other => HarnessError::Numeric(other.to_string()),
        }
    }
}
