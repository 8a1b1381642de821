//! Binaural room impulse response rendering.
//!
//! A scene is a listener at the room center and a talker 1.5 m away in the
//! direction of a grid cell. Reverberant scenes sum the head-relative HRIR of
//! every mirror-image source at its gain and fractional delay; anechoic
//! scenes reduce to the direct path alone.

use super::hrir::HrirProvider;
use super::room::{angles_to_direction, enumerate_image_sources, HeadPose, RoomSpec};
use super::sinc;
use super::AudioError;

/// Talker distance from the listener in meters.
pub const TALKER_DISTANCE_M: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Brir {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: f64,
}

impl Brir {
    pub fn energy(&self) -> f64 {
        self.left.iter().chain(self.right.iter()).map(|v| v * v).sum()
    }
}

/// Renders the stereo impulse response heard by a head posed at `head` from a
/// talker at grid angles (`talker_az_deg`, `talker_el_deg`).
///
/// Anechoic rooms depend only on the per-axis deviation between talker and
/// head, so the direct path is rendered straight from the deviation angles;
/// reverberant rooms mirror the talker through the walls and spatialize each
/// image at its geometric head-relative DOA.
pub fn render_brir(
    room: &RoomSpec,
    talker_az_deg: f64,
    talker_el_deg: f64,
    head: HeadPose,
    provider: &HrirProvider,
    max_order: Option<u32>,
) -> Result<Brir, AudioError> {
    let fs = room.sample_rate;
    if provider.sample_rate() != fs {
        return Err(AudioError::SampleRateMismatch { expected: fs, got: provider.sample_rate() });
    }
    let direct_delay = TALKER_DISTANCE_M / room.speed_of_sound * fs;
    let direct_gain = 1.0 / TALKER_DISTANCE_M;

    if room.is_anechoic() {
        let (hl, hr) = provider.hrir(
            talker_az_deg - head.yaw_deg,
            talker_el_deg - head.pitch_deg,
        )?;
        let len = direct_delay.ceil() as usize + hl.len() + sinc::TAPS;
        let mut left = vec![0.0; len];
        let mut right = vec![0.0; len];
        sinc::add_delayed(&mut left, &hl, direct_delay, direct_gain);
        sinc::add_delayed(&mut right, &hr, direct_delay, direct_gain);
        return Ok(Brir { left, right, sample_rate: fs });
    }

    let listener = room.center();
    let dir = angles_to_direction(talker_az_deg, talker_el_deg);
    let talker = [
        listener[0] + TALKER_DISTANCE_M * dir[0],
        listener[1] + TALKER_DISTANCE_M * dir[1],
        listener[2] + TALKER_DISTANCE_M * dir[2],
    ];
    let images = enumerate_image_sources(room, listener, talker, head, max_order)?;
    let max_delay = images.iter().fold(0.0f64, |m, i| m.max(i.delay_s));
    let len = (max_delay * fs).ceil() as usize + provider.ir_len() + sinc::TAPS;
    let mut left = vec![0.0; len];
    let mut right = vec![0.0; len];
    for img in &images {
        let (hl, hr) = provider.hrir(img.doa_deg.0, img.doa_deg.1)?;
        let delay = img.delay_s * fs;
        sinc::add_delayed(&mut left, &hl, delay, img.gain);
        sinc::add_delayed(&mut right, &hr, delay, img.gain);
    }
    Ok(Brir { left, right, sample_rate: fs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::decay::estimate_t60_schroeder;
    use crate::audio::hrir::parametric_hrir;
    use approx::assert_abs_diff_eq;

    const FS: f64 = 16_000.0;

    fn anechoic_room() -> RoomSpec {
        RoomSpec::new([4.0, 6.0, 4.0], 0.0, FS).unwrap()
    }

    fn provider() -> HrirProvider {
        HrirProvider::parametric(FS)
    }

    /// Lag of the cross-correlation argmax of `a` against `b`.
    fn xcorr_peak_lag(a: &[f64], b: &[f64]) -> usize {
        let mut best = (0usize, f64::MIN);
        for lag in 0..a.len().saturating_sub(b.len()) {
            let c: f64 = b.iter().zip(&a[lag..]).map(|(x, y)| x * y).sum();
            if c > best.1 {
                best = (lag, c);
            }
        }
        best.0
    }

    #[test]
    fn anechoic_is_direct_path_only() {
        let brir = render_brir(&anechoic_room(), 0.0, 0.0, HeadPose::default(), &provider(), None)
            .unwrap();
        let (h, _) = parametric_hrir(0.0, 0.0, FS, &Default::default()).unwrap();

        // The render is the HRIR at gain 1/1.5 and delay 1.5/343 s = 4.373 ms.
        let lag = xcorr_peak_lag(&brir.left, &h);
        let expected_delay = TALKER_DISTANCE_M / 343.0 * FS; // 69.97 samples
        assert!(
            (lag as f64 - expected_delay).abs() <= 1.0,
            "direct path at lag {lag}, expected ~{expected_delay:.2}"
        );
        let h_energy: f64 = h.iter().map(|v| v * v).sum();
        let ear_energy: f64 = brir.left.iter().map(|v| v * v).sum();
        assert_abs_diff_eq!(ear_energy, h_energy / (1.5 * 1.5), epsilon = 0.02 * h_energy);
        // Frontal scene: both ears identical.
        assert_eq!(brir.left, brir.right);
    }

    #[test]
    fn anechoic_depends_only_on_deviation() {
        let room = anechoic_room();
        let p = provider();
        let a = render_brir(&room, 30.0, 0.0, HeadPose { yaw_deg: 15.0, pitch_deg: 0.0 }, &p, None)
            .unwrap();
        let b = render_brir(&room, 15.0, 0.0, HeadPose::default(), &p, None).unwrap();
        assert_eq!(a, b);

        // Holds on elevation too, including mixed poses.
        let c = render_brir(&room, 30.0, 45.0, HeadPose { yaw_deg: 15.0, pitch_deg: 25.0 }, &p, None)
            .unwrap();
        let d = render_brir(&room, 15.0, 20.0, HeadPose::default(), &p, None).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn anechoic_azimuth_sign_swaps_ears() {
        let room = anechoic_room();
        let p = provider();
        let l = render_brir(&room, 40.0, 0.0, HeadPose::default(), &p, None).unwrap();
        let r = render_brir(&room, -40.0, 0.0, HeadPose::default(), &p, None).unwrap();
        assert_eq!(l.left, r.right);
        assert_eq!(l.right, r.left);
    }

    #[test]
    fn reverberant_room_adds_energy_over_direct_path() {
        let room = RoomSpec::new([4.0, 6.0, 4.0], 0.2, FS).unwrap();
        let p = provider();
        let wet = render_brir(&room, 0.0, 0.0, HeadPose::default(), &p, None).unwrap();
        let dry = render_brir(&anechoic_room(), 0.0, 0.0, HeadPose::default(), &p, None).unwrap();
        assert!(wet.energy() > dry.energy());

        // The direct path inside the reverberant render still sits at 4.373 ms.
        let (h, _) = parametric_hrir(0.0, 0.0, FS, &Default::default()).unwrap();
        let lag = xcorr_peak_lag(&wet.left[..1200.min(wet.left.len())], &h);
        assert!((lag as f64 - 69.97).abs() <= 1.0, "direct lag {lag}");
    }

    #[test]
    fn more_absorption_means_less_energy() {
        // Same geometry, shorter t60 -> larger absorption -> weaker tail.
        let p = provider();
        let live = RoomSpec::new([4.0, 6.0, 4.0], 0.4, FS).unwrap();
        let dead = RoomSpec::new([4.0, 6.0, 4.0], 0.2, FS).unwrap();
        let e_live = render_brir(&live, 30.0, 0.0, HeadPose::default(), &p, None)
            .unwrap()
            .energy();
        let e_dead = render_brir(&dead, 30.0, 0.0, HeadPose::default(), &p, None)
            .unwrap()
            .energy();
        assert!(e_dead < e_live, "dead {e_dead} vs live {e_live}");
    }

    #[test]
    fn small_room_schroeder_t60_near_target() {
        let room = RoomSpec::new([4.0, 6.0, 4.0], 0.2, FS).unwrap();
        let brir = render_brir(&room, 0.0, 0.0, HeadPose::default(), &provider(), None).unwrap();
        let est = estimate_t60_schroeder(&brir.left, FS).unwrap();
        assert!(
            (est - 0.2).abs() <= 0.2 * 0.2,
            "schroeder t60 {est:.4} s vs target 0.2 s"
        );
    }

    #[test]
    fn sample_rate_mismatch_rejected() {
        let room = RoomSpec::new([4.0, 6.0, 4.0], 0.2, FS).unwrap();
        let p = HrirProvider::parametric(48_000.0);
        assert!(render_brir(&room, 0.0, 0.0, HeadPose::default(), &p, None).is_err());
    }
}
