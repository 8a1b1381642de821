//! Clip ingest, normalization, talker splits and windowing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::audio::wav::read_wav;

/// Working sample rate of the whole pipeline.
pub const SAMPLE_RATE: f64 = 16_000.0;
/// Clips are exactly 10 s.
pub const CLIP_SAMPLES: usize = 160_000;
/// Every clip is RMS-normalized to this level.
pub const CLIP_RMS_DBFS: f64 = -20.0;
/// Windows are 500 ms.
pub const WINDOW_SAMPLES: usize = 8_000;
/// A clip holds exactly this many windows.
pub const WINDOWS_PER_CLIP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub talker_id: String,
    pub clip_id: String,
    /// 160,000 mono samples at 16 kHz, RMS at -20 dBFS.
    pub samples: Vec<f32>,
}

impl Clip {
    /// The 20 contiguous 500 ms windows tiling the clip.
    pub fn window(&self, index: usize) -> &[f32] {
        &self.samples[index * WINDOW_SAMPLES..(index + 1) * WINDOW_SAMPLES]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct ClipSet {
    pub clips: Vec<Clip>,
    pub split: Split,
}

impl ClipSet {
    pub fn talkers(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.clips.iter().map(|c| c.talker_id.as_str()).collect();
        t.sort_unstable();
        t.dedup();
        t
    }
}

/// Splits a clip into its 20 windows; the clip length is checked at ingest.
pub fn window_clip(samples: &[f32]) -> Result<Vec<&[f32]>, CorpusError> {
    if samples.len() != CLIP_SAMPLES {
        return Err(CorpusError::BadClipLength { expected: CLIP_SAMPLES, got: samples.len() });
    }
    Ok(samples.chunks_exact(WINDOW_SAMPLES).collect())
}

/// Windowed-sinc resampler (64-tap Kaiser), anti-aliased when downsampling.
pub fn resample_sinc(x: &[f64], from_rate: f64, to_rate: f64) -> Vec<f64> {
    if from_rate == to_rate {
        return x.to_vec();
    }
    const HALF: i64 = 32;
    const BETA: f64 = 10.0;
    let i0b = bessel_i0(BETA);
    let ratio = from_rate / to_rate;
    let cutoff = (to_rate / from_rate).min(1.0) * 0.92;
    let n_out = ((x.len() as f64) / ratio).floor() as usize;
    let mut out = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let center = i as f64 * ratio;
        let k0 = center.floor() as i64;
        let mut acc = 0.0;
        for k in (k0 - HALF + 1)..=(k0 + HALF) {
            if k < 0 || k as usize >= x.len() {
                continue;
            }
            let t = k as f64 - center;
            let u = t / HALF as f64;
            if u.abs() >= 1.0 {
                continue;
            }
            let w = bessel_i0(BETA * (1.0 - u * u).sqrt()) / i0b;
            let s = cutoff * sinc(cutoff * t);
            acc += x[k as usize] * s * w;
        }
        out.push(acc);
    }
    out
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0
    } else {
        let p = std::f64::consts::PI * t;
        p.sin() / p
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..32 {
        term *= (x / (2.0 * k as f64)).powi(2);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

/// Scales `x` in place to the target RMS level in dBFS.
pub fn rms_normalize(x: &mut [f64], target_dbfs: f64, origin: &str) -> Result<(), CorpusError> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms <= 0.0 || !rms.is_finite() {
        return Err(CorpusError::ZeroEnergy(origin.to_string()));
    }
    let target = 10f64.powf(target_dbfs / 20.0);
    let g = target / rms;
    for v in x {
        *v *= g;
    }
    Ok(())
}

/// Reads an audio file, mixes to mono, resamples to 16 kHz, keeps the first
/// 10 s and normalizes to the reference RMS.
pub fn ingest_clip(path: &Path) -> Result<Vec<f32>, CorpusError> {
    let (channels, rate) = read_wav(path)?;
    let n = channels.first().map_or(0, |c| c.len());
    let mut mono = vec![0.0f64; n];
    for ch in &channels {
        for (m, &v) in mono.iter_mut().zip(ch) {
            *m += v;
        }
    }
    let scale = 1.0 / channels.len().max(1) as f64;
    for m in &mut mono {
        *m *= scale;
    }
    let mut x = resample_sinc(&mono, rate as f64, SAMPLE_RATE);
    let dur = x.len() as f64 / SAMPLE_RATE;
    if x.len() < CLIP_SAMPLES {
        return Err(CorpusError::ClipTooShort {
            path: path.display().to_string(),
            got_s: dur,
            need_s: 10.0,
        });
    }
    x.truncate(CLIP_SAMPLES);
    rms_normalize(&mut x, CLIP_RMS_DBFS, &path.display().to_string())?;
    Ok(x.iter().map(|&v| v as f32).collect())
}

/// Corpus manifest: talker id -> clip paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest(pub BTreeMap<String, Vec<PathBuf>>);

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CorpusError::Manifest(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CorpusError::Manifest(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Talker and clip counts for a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_talkers: usize,
    pub train_clips_per_talker: usize,
    pub test_talkers: usize,
    pub test_clips_per_talker: usize,
}

impl SplitSpec {
    /// 40 train talkers x 30 clips, 10 test talkers x 20 clips.
    pub fn full_scale() -> Self {
        Self {
            train_talkers: 40,
            train_clips_per_talker: 30,
            test_talkers: 10,
            test_clips_per_talker: 20,
        }
    }

    /// Reduced profile: enough material for the 7x3 task.
    pub fn desk() -> Self {
        Self {
            train_talkers: 6,
            train_clips_per_talker: 8,
            test_talkers: 3,
            test_clips_per_talker: 4,
        }
    }
}

/// (talker, selected clip paths) rows of one split.
pub type SplitPlan = Vec<(String, Vec<PathBuf>)>;

/// Deterministic selection of disjoint train/test talkers and their clips.
/// Returns the plans for both splits.
pub fn plan_split(
    manifest: &Manifest,
    seed: u64,
    spec: &SplitSpec,
) -> Result<(SplitPlan, SplitPlan), CorpusError> {
    let need = spec.train_talkers + spec.test_talkers;
    if manifest.0.len() < need {
        return Err(CorpusError::InsufficientTalkers { need, have: manifest.0.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut talkers: Vec<&String> = manifest.0.keys().collect();
    talkers.shuffle(&mut rng);

    let mut pick = |ids: &[&String], clips_per: usize| -> Result<Vec<(String, Vec<PathBuf>)>, CorpusError> {
        ids.iter()
            .map(|id| {
                let avail = &manifest.0[*id];
                if avail.len() < clips_per {
                    return Err(CorpusError::InsufficientClips {
                        talker: (*id).clone(),
                        need: clips_per,
                        have: avail.len(),
                    });
                }
                let mut paths = avail.clone();
                paths.shuffle(&mut rng);
                paths.truncate(clips_per);
                Ok(((*id).clone(), paths))
            })
            .collect()
    };

    let train = pick(&talkers[..spec.train_talkers], spec.train_clips_per_talker)?;
    let test = pick(
        &talkers[spec.train_talkers..need],
        spec.test_clips_per_talker,
    )?;
    Ok((train, test))
}

/// Plans the split and ingests the selected files into memory.
pub fn split_corpus(
    manifest: &Manifest,
    seed: u64,
    spec: &SplitSpec,
) -> Result<(ClipSet, ClipSet), CorpusError> {
    let (train_plan, test_plan) = plan_split(manifest, seed, spec)?;
    let load = |plan: Vec<(String, Vec<PathBuf>)>, split: Split| -> Result<ClipSet, CorpusError> {
        let mut clips = Vec::new();
        for (talker, paths) in plan {
            for path in paths {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                clips.push(Clip {
                    talker_id: talker.clone(),
                    clip_id: stem,
                    samples: ingest_clip(&path)?,
                });
            }
        }
        Ok(ClipSet { clips, split })
    };
    Ok((load(train_plan, Split::Train)?, load(test_plan, Split::Test)?))
}
