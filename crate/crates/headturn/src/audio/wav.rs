//! Thin WAV container layer over `hound`: integer and float formats in,
//! float32 out. Samples are exchanged as f64 in [-1, 1].

use std::path::Path;

use super::AudioError;

fn wav_err<E: std::fmt::Display>(e: E) -> AudioError {
    AudioError::Wav(e.to_string())
}

/// Reads all channels of a WAV file. Returns per-channel samples and the rate.
pub fn read_wav(path: &Path) -> Result<(Vec<Vec<f64>>, u32), AudioError> {
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let ch = spec.channels as usize;
    if ch == 0 {
        return Err(AudioError::Wav(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let frames = interleaved.len() / ch;
    let mut channels = vec![Vec::with_capacity(frames); ch];
    for (i, &v) in interleaved.iter().enumerate() {
        channels[i % ch].push(v);
    }
    Ok((channels, spec.sample_rate))
}

/// Writes channels as 32-bit float WAV. All channels must share a length.
pub fn write_wav_f32(path: &Path, channels: &[&[f64]], sample_rate: u32) -> Result<(), AudioError> {
    if channels.is_empty() {
        return Err(AudioError::EmptyInput("channels"));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(AudioError::Wav("channel length mismatch".into()));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for i in 0..len {
        for c in channels {
            writer.write_sample(c[i] as f32).map_err(wav_err)?;
        }
    }
    writer.finalize().map_err(wav_err)
}
