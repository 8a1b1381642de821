//! Observation features: per-ear log-mel spectrograms over 500 ms windows,
//! optionally extended with a per-frame GCC-PHAT cross-correlation block.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: f64,
    /// STFT window length in samples (25 ms).
    pub win: usize,
    /// STFT hop in samples (10 ms).
    pub hop: usize,
    pub n_mels: usize,
    /// Log-energy floor in dB.
    pub floor_db: f64,
    /// Cross-correlation lags appended per frame; 0 disables the block.
    pub gcc_lags: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000.0,
            win: 400,
            hop: 160,
            n_mels: 64,
            floor_db: -80.0,
            gcc_lags: 0,
        }
    }
}

impl FeatureConfig {
    pub fn with_gcc() -> Self {
        Self { gcc_lags: 61, ..Default::default() }
    }

    pub fn n_frames(&self, segment_len: usize) -> usize {
        1 + (segment_len - self.win) / self.hop
    }

    /// Feature dimension per frame: both ears' mel bands plus the lag block.
    pub fn dim(&self) -> usize {
        2 * self.n_mels + self.gcc_lags
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `n_mels` x (n_fft/2 + 1).
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: f64) -> Array2<f64> {
    let n_bins = n_fft / 2 + 1;
    let f_max = sample_rate / 2.0;
    let pts: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(hz_to_mel(f_max) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let mut fb = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (lo, mid, hi) = (pts[m], pts[m + 1], pts[m + 2]);
        for b in 0..n_bins {
            let f = b as f64 * sample_rate / n_fft as f64;
            let w = if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            if w > 0.0 {
                fb[[m, b]] = w;
            }
        }
    }
    fb
}

/// Stateless-in, reusable FFT plans and filterbank for one configuration.
pub struct FeatureExtractor {
    pub cfg: FeatureConfig,
    hann: Vec<f64>,
    mel: Array2<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(cfg.win);
        let ifft = planner.plan_fft_inverse(cfg.win);
        let hann: Vec<f64> = (0..cfg.win)
            .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / cfg.win as f64).cos()))
            .collect();
        let mel = mel_filterbank(cfg.n_mels, cfg.win, cfg.sample_rate);
        Self { cfg, hann, mel, fft, ifft }
    }

    /// Windowed complex spectra of one frame.
    fn frame_spectrum(&self, x: &[f64], start: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x[start..start + self.cfg.win]
            .iter()
            .zip(&self.hann)
            .map(|(&v, &w)| Complex64::new(v * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf
    }

    fn log_mel_row(&self, spec: &[Complex64], out: &mut [f64]) {
        let n_bins = self.cfg.win / 2 + 1;
        for (m, o) in out.iter_mut().enumerate() {
            let mut p = 0.0;
            for b in 0..n_bins {
                let w = self.mel[[m, b]];
                if w > 0.0 {
                    p += w * spec[b].norm_sqr();
                }
            }
            *o = if p > 0.0 {
                (10.0 * p.log10()).max(self.cfg.floor_db)
            } else {
                self.cfg.floor_db
            };
        }
    }

    /// Phase-transform cross-correlation of one frame pair at the configured
    /// lags, ordered -L..+L where positive lag means the left ear leads.
    fn gcc_phat_row(&self, l: &[Complex64], r: &[Complex64], out: &mut [f64]) {
        let n = self.cfg.win;
        let mut cross: Vec<Complex64> = l
            .iter()
            .zip(r)
            .map(|(a, b)| {
                let c = a * b.conj();
                let mag = c.norm();
                if mag > 1e-12 {
                    c / mag
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        self.ifft.process(&mut cross);
        let half = (out.len() - 1) / 2;
        for (i, o) in out.iter_mut().enumerate() {
            let lag = i as i64 - half as i64;
            let idx = lag.rem_euclid(n as i64) as usize;
            *o = cross[idx].re / n as f64;
        }
    }

    /// Feature frames for one stereo segment of exactly 8,000 samples/ear.
    pub fn extract(&self, left: &[f64], right: &[f64]) -> Result<Array2<f64>, EnvError> {
        const SEGMENT: usize = 8_000;
        if left.len() != SEGMENT || right.len() != SEGMENT {
            return Err(EnvError::BadSegment { expected: SEGMENT, left: left.len(), right: right.len() });
        }
        let t = self.cfg.n_frames(SEGMENT);
        let n_mels = self.cfg.n_mels;
        let mut out = Array2::zeros((t, self.cfg.dim()));
        for fr in 0..t {
            let start = fr * self.cfg.hop;
            let sl = self.frame_spectrum(left, start);
            let sr = self.frame_spectrum(right, start);
            let mut row = out.row_mut(fr);
            let row = row.as_slice_mut().expect("contiguous row");
            self.log_mel_row(&sl, &mut row[..n_mels]);
            self.log_mel_row(&sr, &mut row[n_mels..2 * n_mels]);
            if self.cfg.gcc_lags > 0 {
                self.gcc_phat_row(&sl, &sr, &mut row[2 * n_mels..]);
            }
        }
        Ok(out)
    }
}

/// Fixed per-dimension standardization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Mean and standard deviation per dimension over a feature sample.
    /// Near-constant dimensions keep std 1 to avoid blowing up the floor.
    pub fn fit(frames: &[Array2<f64>]) -> Self {
        let dim = frames.first().map_or(0, |f| f.ncols());
        let mut n = 0f64;
        let mut sum = vec![0f64; dim];
        let mut sumsq = vec![0f64; dim];
        for f in frames {
            for row in f.rows() {
                n += 1.0;
                for (d, &v) in row.iter().enumerate() {
                    sum[d] += v;
                    sumsq[d] += v * v;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n.max(1.0)).collect();
        let std: Vec<f64> = sumsq
            .iter()
            .zip(&mean)
            .map(|(&sq, &m)| {
                let var = (sq / n.max(1.0) - m * m).max(0.0);
                let s = var.sqrt();
                if s < 1e-6 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Self {
            mean: mean.iter().map(|&v| v as f32).collect(),
            std: std.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn apply(&self, frames: &Array2<f64>) -> Array2<f32> {
        let mut out = Array2::zeros(frames.dim());
        for (i, row) in frames.rows().into_iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                out[[i, d]] = ((v - self.mean[d] as f64) / self.std[d] as f64) as f32;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
            .collect()
    }

    #[test]
    fn frame_count_is_48() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.n_frames(8_000), 48);
        let ex = FeatureExtractor::new(cfg);
        let x = sine(440.0, 0.1, 8_000);
        let f = ex.extract(&x, &x).unwrap();
        assert_eq!(f.dim(), (48, 128));
    }

    #[test]
    fn silence_sits_at_the_floor() {
        let ex = FeatureExtractor::new(FeatureConfig::default());
        let z = vec![0.0; 8_000];
        let f = ex.extract(&z, &z).unwrap();
        assert!(f.iter().all(|&v| v == -80.0));
    }

    #[test]
    fn extraction_is_deterministic() {
        let ex = FeatureExtractor::new(FeatureConfig::default());
        let l = sine(1000.0, 0.3, 8_000);
        let r = sine(700.0, 0.2, 8_000);
        assert_eq!(ex.extract(&l, &r).unwrap(), ex.extract(&l, &r).unwrap());
    }

    #[test]
    fn wrong_length_rejected() {
        let ex = FeatureExtractor::new(FeatureConfig::default());
        let z = vec![0.0; 7_999];
        assert!(ex.extract(&z, &z).is_err());
        assert!(ex.extract(&vec![0.0; 8_000], &z).is_err());
    }

    #[test]
    fn tone_lands_in_the_right_mel_band() {
        let cfg = FeatureConfig::default();
        let ex = FeatureExtractor::new(cfg);
        let x = sine(1000.0, 0.5, 8_000);
        let f = ex.extract(&x, &x).unwrap();
        let row = f.row(10);
        let peak = row
            .iter()
            .take(cfg.n_mels)
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // 1 kHz on a 64-band HTK-mel scale to 8 kHz: band center mel(1000) =
        // 999.99.. of mel(8000) = 2840.02 -> fractional position 0.352 ->
        // band index near 0.352 * 65 - 1 = 21.9.
        assert!((20..=24).contains(&peak), "peak at band {peak}");
        // Identical ears -> identical halves.
        for fr in 0..48 {
            for m in 0..64 {
                assert_eq!(f[[fr, m]], f[[fr, 64 + m]]);
            }
        }
    }

    #[test]
    fn level_difference_shows_up_across_ears() {
        let ex = FeatureExtractor::new(FeatureConfig::default());
        let l = sine(1000.0, 0.5, 8_000);
        let r = sine(1000.0, 0.05, 8_000); // -20 dB on the right
        let f = ex.extract(&l, &r).unwrap();
        let row = f.row(20);
        let (ml, mr) = (row[22], row[64 + 22]);
        assert!(ml - mr > 15.0, "ILD {} dB", ml - mr);
    }

    #[test]
    fn gcc_phat_peaks_at_the_true_lag() {
        let ex = FeatureExtractor::new(FeatureConfig::with_gcc());
        let base = sine(800.0, 0.4, 8_100);
        // Right ear delayed by 8 samples: left leads -> positive lag.
        let l: Vec<f64> = base[8..8_008].to_vec();
        let r: Vec<f64> = base[0..8_000].to_vec();
        let f = ex.extract(&l, &r).unwrap();
        assert_eq!(f.dim().1, 128 + 61);
        let row = f.row(20);
        let lags = &row.as_slice().unwrap()[128..];
        let peak = lags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0 as i64
            - 30;
        assert_eq!(peak.abs(), 8, "peak lag {peak}");
    }

    #[test]
    fn normalizer_fit_and_apply() {
        let ex = FeatureExtractor::new(FeatureConfig::default());
        let a = ex.extract(&sine(500.0, 0.4, 8_000), &sine(500.0, 0.2, 8_000)).unwrap();
        let b = ex.extract(&sine(2000.0, 0.3, 8_000), &sine(2000.0, 0.3, 8_000)).unwrap();
        let norm = Normalizer::fit(&[a.clone(), b.clone()]);
        assert_eq!(norm.mean.len(), 128);
        // Standardized sample mean over the fit set is ~0 per active dim.
        let sa = norm.apply(&a);
        let sb = norm.apply(&b);
        for d in 0..128 {
            let m: f32 = sa.column(d).iter().chain(sb.column(d)).sum::<f32>() / 96.0;
            assert!(m.abs() < 1e-3, "dim {d} mean {m}");
        }
        // Constant dims (silence floor) keep std 1.
        let z = ex.extract(&vec![0.0; 8_000], &vec![0.0; 8_000]).unwrap();
        let nz = Normalizer::fit(&[z]);
        assert!(nz.std.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn filterbank_covers_the_band() {
        let fb = mel_filterbank(64, 400, 16_000.0);
        assert_eq!(fb.dim(), (64, 201));
        assert!(fb.iter().all(|&w| (0.0..=1.0).contains(&w)));
        // Every filter has support, and interior bins are covered.
        for m in 0..64 {
            assert!(fb.row(m).sum() > 0.0, "empty filter {m}");
        }
        let col_sums: Vec<f64> = (1..200).map(|b| fb.column(b).sum()).collect();
        assert!(col_sums.iter().filter(|&&s| s == 0.0).count() <= 8);
    }
}
