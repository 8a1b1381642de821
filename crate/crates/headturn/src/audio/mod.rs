//! Binaural room acoustics: absorption, image sources, parametric HRIRs,
//! BRIR rendering, FFT convolution and reverberation-time estimation.

pub mod brir;
pub mod convolve;
pub mod decay;
pub mod hrir;
pub mod room;
mod sinc;
pub mod wav;

use thiserror::Error;

/// Speed of sound in air, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("convolution length overflow: {signal} + {ir} - 1 exceeds usize")]
    LengthOverflow { signal: usize, ir: usize },
    #[error("reverberation time must be positive, got {0}; t60 = 0 denotes an anechoic scene")]
    AnechoicRoom(f64),
    #[error("room dimensions must be positive, got {0:?}")]
    BadRoomDims([f64; 3]),
    #[error("talker position {0:?} lies outside the room")]
    TalkerOutsideRoom([f64; 3]),
    #[error("insufficient decay: impulse response spans {span_db:.1} dB below the -5 dB point, need at least 10 dB")]
    InsufficientDecay { span_db: f64 },
    #[error("sample rate must be positive, got {0}")]
    BadSampleRate(f64),
    #[error("sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: f64, got: f64 },
    #[error("wav: {0}")]
    Wav(String),
}
