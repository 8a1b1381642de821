//! Head-related impulse responses: parametric binaural model and measured
//! packs loaded from disk.
//!
//! The parametric model combines three cues (azimuth positive to the
//! listener's right):
//! - Woodworth interaural time difference on the lateral angle, applied to
//!   the far ear as a fractional delay,
//! - a first-order head-shadow low-pass plus broadband attenuation on the
//!   far ear, both deepening with lateral angle,
//! - an elevation notch whose center frequency rises linearly from 6 kHz at
//!   -45 degrees to 11 kHz at +45 degrees, applied to both ears and skipped
//!   when the center sits at or above Nyquist.
//!
//! It is defined for every real direction of arrival.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::sinc;
use super::wav::read_wav;
use super::{AudioError, SPEED_OF_SOUND};

/// Spherical head radius used by the Woodworth formula, meters.
pub const HEAD_RADIUS_M: f64 = 0.0875;

#[derive(Debug, Clone)]
pub struct ParametricConfig {
    pub head_radius_m: f64,
    /// Impulse response duration in seconds.
    pub ir_duration_s: f64,
    /// Lead-in before the direct peak, leaves room for interpolation pre-ring.
    pub base_delay_s: f64,
    /// Far-ear shadow cutoff at 90 degrees lateral angle, Hz.
    pub shadow_min_cutoff_hz: f64,
    /// Far-ear shadow cutoff at 0 degrees lateral angle, Hz.
    pub shadow_max_cutoff_hz: f64,
    /// Far-ear broadband amplitude cut at 90 degrees lateral angle.
    pub shadow_level_cut: f64,
    pub notch_q: f64,
}

impl Default for ParametricConfig {
    fn default() -> Self {
        Self {
            head_radius_m: HEAD_RADIUS_M,
            ir_duration_s: 0.012,
            base_delay_s: 0.0015,
            shadow_min_cutoff_hz: 1200.0,
            shadow_max_cutoff_hz: 8000.0,
            shadow_level_cut: 0.45,
            notch_q: 6.0,
        }
    }
}

/// Signed lateral angle in radians; positive means the source is to the right.
fn lateral_angle_rad(az_deg: f64, el_deg: f64) -> f64 {
    let s = az_deg.abs().to_radians().sin() * el_deg.to_radians().cos();
    let phi = s.clamp(-1.0, 1.0).asin();
    if az_deg < 0.0 {
        -phi
    } else {
        phi
    }
}

/// Woodworth ITD in seconds; positive means the left (far) ear lags.
pub fn woodworth_itd_s(head_radius_m: f64, az_deg: f64, el_deg: f64) -> f64 {
    let phi = lateral_angle_rad(az_deg, el_deg);
    let mag = head_radius_m / SPEED_OF_SOUND * (phi.abs().sin() + phi.abs());
    if phi < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Elevation notch center frequency in Hz: 8.5 kHz at zero elevation,
/// sweeping 2.5 kHz per 45 degrees.
pub fn notch_center_hz(el_deg: f64) -> f64 {
    8500.0 + el_deg / 45.0 * 2500.0
}

fn one_pole_lowpass(buf: &mut [f64], cutoff_hz: f64, fs: f64) {
    let a = (-2.0 * std::f64::consts::PI * cutoff_hz / fs).exp();
    let mut y = 0.0;
    for v in buf.iter_mut() {
        y = (1.0 - a) * *v + a * y;
        *v = y;
    }
}

fn biquad_notch(buf: &mut [f64], fc: f64, fs: f64, q: f64) {
    let w = 2.0 * std::f64::consts::PI * fc / fs;
    let alpha = w.sin() / (2.0 * q);
    let norm = 1.0 / (1.0 + alpha);
    let b0 = norm;
    let b1 = -2.0 * w.cos() * norm;
    let b2 = norm;
    let a1 = b1;
    let a2 = (1.0 - alpha) * norm;
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in buf.iter_mut() {
        let x = *v;
        let y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Renders the parametric HRIR pair (left, right) at `sample_rate`.
pub fn parametric_hrir(
    az_deg: f64,
    el_deg: f64,
    sample_rate: f64,
    cfg: &ParametricConfig,
) -> Result<(Vec<f64>, Vec<f64>), AudioError> {
    if sample_rate.is_nan() || sample_rate <= 0.0 {
        return Err(AudioError::BadSampleRate(sample_rate));
    }
    let n = ((cfg.ir_duration_s * sample_rate).round() as usize).max(64);
    let base = (cfg.base_delay_s * sample_rate).round().max(sinc::CENTER as f64 + 1.0);
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];

    let phi = lateral_angle_rad(az_deg, el_deg);
    let abs_phi = phi.abs();
    let itd = cfg.head_radius_m / SPEED_OF_SOUND * (abs_phi.sin() + abs_phi);

    if phi == 0.0 {
        left[base as usize] = 1.0;
        right[base as usize] = 1.0;
    } else {
        let sin_phi = abs_phi.sin();
        let cutoff = cfg.shadow_max_cutoff_hz
            - (cfg.shadow_max_cutoff_hz - cfg.shadow_min_cutoff_hz) * sin_phi;
        let level = 1.0 - cfg.shadow_level_cut * sin_phi;
        let (near, far) = if phi > 0.0 {
            (&mut right, &mut left)
        } else {
            (&mut left, &mut right)
        };
        near[base as usize] = 1.0;
        sinc::add_delayed(far, &[1.0], base + itd * sample_rate, 1.0);
        one_pole_lowpass(far, cutoff, sample_rate);
        for v in far.iter_mut() {
            *v *= level;
        }
    }

    let fc = notch_center_hz(el_deg);
    if fc < 0.999 * sample_rate / 2.0 && fc > 0.0 {
        biquad_notch(&mut left, fc, sample_rate, cfg.notch_q);
        biquad_notch(&mut right, fc, sample_rate, cfg.notch_q);
    }
    Ok((left, right))
}

#[derive(Debug, Deserialize)]
struct PackManifest {
    sample_rate: u32,
    /// Measured grid as (azimuth, elevation) integer degrees.
    grid: Vec<(i32, i32)>,
}

/// Measured HRIR pack: a directory of `az{A}_el{E}.wav` stereo files plus a
/// `manifest.json` declaring the grid and sample rate.
#[derive(Debug, Clone)]
pub struct HrirPack {
    sample_rate: u32,
    entries: BTreeMap<(i32, i32), (Vec<f64>, Vec<f64>)>,
}

impl HrirPack {
    pub fn entry_path(dir: &Path, az: i32, el: i32) -> PathBuf {
        dir.join(format!("az{az}_el{el}.wav"))
    }

    pub fn load(dir: &Path) -> Result<Self, AudioError> {
        let manifest_path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| AudioError::Wav(format!("{}: {e}", manifest_path.display())))?;
        let manifest: PackManifest = serde_json::from_str(&text)
            .map_err(|e| AudioError::Wav(format!("{}: {e}", manifest_path.display())))?;
        let mut entries = BTreeMap::new();
        for (az, el) in manifest.grid {
            let path = Self::entry_path(dir, az, el);
            let (channels, fs) = read_wav(&path)?;
            if fs != manifest.sample_rate {
                return Err(AudioError::Wav(format!(
                    "{}: sample rate {} does not match manifest {}",
                    path.display(),
                    fs,
                    manifest.sample_rate
                )));
            }
            if channels.len() != 2 {
                return Err(AudioError::Wav(format!(
                    "{}: expected stereo, got {} channels",
                    path.display(),
                    channels.len()
                )));
            }
            let mut it = channels.into_iter();
            entries.insert((az, el), (it.next().unwrap(), it.next().unwrap()));
        }
        if entries.is_empty() {
            return Err(AudioError::Wav(format!("{}: empty HRIR grid", dir.display())));
        }
        Ok(Self { sample_rate: manifest.sample_rate, entries })
    }

    /// Nearest measured direction; azimuth distance wraps at 360 degrees.
    pub fn nearest(&self, az_deg: f64, el_deg: f64) -> (i32, i32) {
        let mut best = (f64::INFINITY, (0, 0));
        for &(az, el) in self.entries.keys() {
            let mut daz = (az as f64 - az_deg).rem_euclid(360.0);
            if daz > 180.0 {
                daz = 360.0 - daz;
            }
            let del = el as f64 - el_deg;
            let d2 = daz * daz + del * del;
            if d2 < best.0 {
                best = (d2, (az, el));
            }
        }
        best.1
    }
}

/// Source of HRIRs for rendering.
#[derive(Debug, Clone)]
pub enum HrirProvider {
    Parametric { sample_rate: f64, config: ParametricConfig },
    Pack(HrirPack),
}

impl HrirProvider {
    pub fn parametric(sample_rate: f64) -> Self {
        Self::Parametric { sample_rate, config: ParametricConfig::default() }
    }

    pub fn sample_rate(&self) -> f64 {
        match self {
            Self::Parametric { sample_rate, .. } => *sample_rate,
            Self::Pack(p) => p.sample_rate as f64,
        }
    }

    /// Impulse response length in samples.
    pub fn ir_len(&self) -> usize {
        match self {
            Self::Parametric { sample_rate, config } => {
                ((config.ir_duration_s * sample_rate).round() as usize).max(64)
            }
            Self::Pack(p) => p
                .entries
                .values()
                .map(|(l, _)| l.len())
                .max()
                .unwrap_or(0),
        }
    }

    pub fn hrir(&self, az_deg: f64, el_deg: f64) -> Result<(Vec<f64>, Vec<f64>), AudioError> {
        match self {
            Self::Parametric { sample_rate, config } => {
                parametric_hrir(az_deg, el_deg, *sample_rate, config)
            }
            Self::Pack(p) => {
                let key = p.nearest(az_deg, el_deg);
                let (l, r) = &p.entries[&key];
                Ok((l.clone(), r.clone()))
            }
        }
    }
}
