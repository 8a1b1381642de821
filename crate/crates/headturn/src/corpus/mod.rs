//! Speech corpus handling and BRIR precomputation: clip ingest and
//! normalization, train/test talker splits, 500 ms windowing, synthetic
//! voice generation, and the on-disk BRIR cache.

pub mod cache;
pub mod clips;
pub mod synth;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("clip too short: {got_s:.2} s, need {need_s} s ({path})")]
    ClipTooShort { path: String, got_s: f64, need_s: f64 },
    #[error("zero energy, cannot normalize ({0})")]
    ZeroEnergy(String),
    #[error("insufficient talkers: need {need}, manifest has {have}")]
    InsufficientTalkers { need: usize, have: usize },
    #[error("insufficient clips for talker {talker}: need {need}, have {have}")]
    InsufficientClips { talker: String, need: usize, have: usize },
    #[error("clip must be exactly {expected} samples, got {got}")]
    BadClipLength { expected: usize, got: usize },
    #[error("stale cache at {dir}: index hash {found} != config hash {expected}")]
    StaleCache { dir: String, expected: String, found: String },
    #[error("missing BRIR for ({env_id}, talker ({t_az},{t_el}), head ({h_az},{h_el}))")]
    MissingEntry { env_id: String, t_az: i32, t_el: i32, h_az: i32, h_el: i32 },
    #[error("unknown environment id {0:?}; expected anechoic, low, med or high")]
    UnknownEnv(String),
    #[error("cache at {dir} was built for a different geometry or rate")]
    CacheMismatch { dir: String },
    #[error("audio: {0}")]
    Audio(#[from] crate::audio::AudioError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(String),
}
