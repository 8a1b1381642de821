//! POMDP head-orientation task: grid geometry, rewards, episode engine and
//! observation features.

pub mod episode;
pub mod features;
pub mod grid;
pub mod reward;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("segment must be {expected} samples per ear, got left {left}, right {right}")]
    BadSegment { expected: usize, left: usize, right: usize },
    #[error("episode is done; reset before stepping")]
    EpisodeDone,
    #[error("no BRIR for {0}")]
    MissingBrir(String),
    #[error("clip set is empty")]
    EmptyClipSet,
    #[error("clip index {0} out of range")]
    BadClipIndex(usize),
    #[error("audio: {0}")]
    Audio(#[from] crate::audio::AudioError),
}
