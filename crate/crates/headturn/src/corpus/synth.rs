//! Synthetic talkers: harmonic glottal source, per-talker formant filters,
//! syllabic gating and a breath-noise floor. Nothing here aims at natural
//! speech; the goal is talker-distinct broadband material with speech-like
//! temporal structure for the localization task.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::clips::{Manifest, SAMPLE_RATE};
use super::CorpusError;
use crate::audio::wav::write_wav_f32;

#[derive(Debug, Clone, PartialEq)]
pub struct Voice {
    /// Fundamental in Hz.
    pub f0: f64,
    /// (center Hz, bandwidth Hz) resonators.
    pub formants: [(f64, f64); 3],
    /// Syllable rate in Hz.
    pub syllable_hz: f64,
    /// Breath-noise level relative to the voiced part.
    pub breath: f64,
}

/// Talker-specific voice parameters, deterministic in the seed.
pub fn talker_voice(seed: u64) -> Voice {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a1c_e5d3_9b24_f00d);
    Voice {
        f0: rng.gen_range(85.0..255.0),
        formants: [
            (rng.gen_range(300.0..850.0), rng.gen_range(60.0..120.0)),
            (rng.gen_range(900.0..2200.0), rng.gen_range(80.0..180.0)),
            (rng.gen_range(2300.0..3400.0), rng.gen_range(120.0..260.0)),
        ],
        syllable_hz: rng.gen_range(3.0..5.5),
        breath: rng.gen_range(0.02..0.08),
    }
}

/// Two-pole resonator applied in place.
fn resonate(x: &mut [f64], center_hz: f64, bw_hz: f64, fs: f64) {
    let r = (-std::f64::consts::PI * bw_hz / fs).exp();
    let theta = 2.0 * std::f64::consts::PI * center_hz / fs;
    let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
    let gain = (1.0 - r) * (1.0 - r * theta.cos() * 2.0 + r * r).sqrt();
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = gain * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// One clip of a given voice; distinct `clip_seed`s give distinct material.
pub fn synth_clip(voice: &Voice, clip_seed: u64, duration_s: f64, fs: f64) -> Vec<f64> {
    let n = (duration_s * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
    let mut x = vec![0.0; n];

    // Voiced source: harmonic stack under a slow random f0 drift.
    let n_harm = ((fs / 2.0 * 0.9) / voice.f0) as usize;
    let phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let mut f0_walk = 0.0f64;
    let mut phase = 0.0f64;
    let drift_step = voice.f0 * 0.002;
    for (i, v) in x.iter_mut().enumerate() {
        if i % 160 == 0 {
            f0_walk = (f0_walk + rng.gen_range(-drift_step..drift_step)).clamp(-0.15 * voice.f0, 0.15 * voice.f0);
        }
        let f0 = voice.f0 + f0_walk;
        phase += std::f64::consts::TAU * f0 / fs;
        for (k, ph) in phases.iter().enumerate() {
            let h = (k + 1) as f64;
            if h * f0 < fs / 2.0 * 0.9 {
                *v += (phase * h + ph).sin() / h;
            }
        }
    }
    for (c, bw) in voice.formants {
        resonate(&mut x, c, bw, fs);
    }

    // Syllabic gate: smoothed on/off segments with occasional pauses.
    let mut gate = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let on = rng.gen_bool(0.75);
        let seg = (fs / voice.syllable_hz * rng.gen_range(0.6..1.6)) as usize;
        let end = (i + seg).min(n);
        if on {
            for (j, g) in gate[i..end].iter_mut().enumerate() {
                let ramp = 0.015 * fs;
                let up = (j as f64 / ramp).min(1.0);
                let down = ((end - i - j) as f64 / ramp).min(1.0);
                *g = up.min(down);
            }
        }
        i = end;
    }
    for (v, g) in x.iter_mut().zip(&gate) {
        *v *= g;
    }

    // Breath floor keeps the spectrum busy up to Nyquist and avoids
    // zero-energy windows.
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
    for v in x.iter_mut() {
        *v += peak * voice.breath * rng.gen_range(-1.0..1.0);
    }
    x
}

/// Writes `n_talkers` x `clips_per_talker` synthetic clips plus a manifest
/// under `dir`; returns the manifest.
pub fn generate_corpus(
    dir: &Path,
    n_talkers: usize,
    clips_per_talker: usize,
    seed: u64,
) -> Result<Manifest, CorpusError> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = std::collections::BTreeMap::new();
    for t in 0..n_talkers {
        let talker_id = format!("talker{t:03}");
        let voice = talker_voice(seed.wrapping_add(t as u64));
        let tdir = dir.join(&talker_id);
        std::fs::create_dir_all(&tdir)?;
        let mut paths: Vec<PathBuf> = Vec::new();
        for c in 0..clips_per_talker {
            let clip_seed = seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add((t as u64) << 20)
                .wrapping_add(c as u64);
            // 10.5 s so ingest exercises truncation.
            let x = synth_clip(&voice, clip_seed, 10.5, SAMPLE_RATE);
            let path = tdir.join(format!("clip{c:02}.wav"));
            write_wav_f32(&path, &[&x], SAMPLE_RATE as u32)?;
            paths.push(path);
        }
        manifest.insert(talker_id, paths);
    }
    let m = Manifest(manifest);
    m.save(&dir.join("manifest.json"))?;
    Ok(m)
}
