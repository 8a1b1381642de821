//! Shoebox room model: Sabine absorption and mirror-image source enumeration.

use log::warn;

use super::{AudioError, SPEED_OF_SOUND};

/// Rectangular room. `t60 == 0` denotes an anechoic scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomSpec {
    /// Length, width, height in meters.
    pub dims: [f64; 3],
    /// Reverberation time in seconds.
    pub t60: f64,
    /// Speed of sound in m/s.
    pub speed_of_sound: f64,
    /// Rendering rate in Hz.
    pub sample_rate: f64,
}

impl RoomSpec {
    pub fn new(dims: [f64; 3], t60: f64, sample_rate: f64) -> Result<Self, AudioError> {
        if dims.iter().any(|&d| d.is_nan() || d <= 0.0 || !d.is_finite()) {
            return Err(AudioError::BadRoomDims(dims));
        }
        if t60.is_nan() || t60 < 0.0 || !t60.is_finite() {
            return Err(AudioError::AnechoicRoom(t60));
        }
        if sample_rate.is_nan() || sample_rate <= 0.0 || !sample_rate.is_finite() {
            return Err(AudioError::BadSampleRate(sample_rate));
        }
        Ok(Self { dims, t60, speed_of_sound: SPEED_OF_SOUND, sample_rate })
    }

    pub fn is_anechoic(&self) -> bool {
        self.t60 == 0.0
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn surface_area(&self) -> f64 {
        let [w, l, h] = self.dims;
        2.0 * (w * l + w * h + l * h)
    }

    pub fn center(&self) -> [f64; 3] {
        [self.dims[0] / 2.0, self.dims[1] / 2.0, self.dims[2] / 2.0]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter()
            .zip(self.dims.iter())
            .all(|(&x, &d)| x >= 0.0 && x <= d)
    }
}

/// Head orientation, yaw applied before pitch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadPose {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

/// One mirror image of the talker.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    pub position: [f64; 3],
    /// Total number of wall reflections.
    pub order: u32,
    /// Amplitude gain: beta^order / distance.
    pub gain: f64,
    /// Propagation delay in seconds.
    pub delay_s: f64,
    /// Direction of arrival relative to the head, degrees (azimuth, elevation).
    pub doa_deg: (f64, f64),
}

/// Uniform Sabine absorption: alpha = 0.161 V / (S t60), clamped to (0, 0.999].
pub fn sabine_absorption(room: &RoomSpec) -> Result<f64, AudioError> {
    if room.t60 <= 0.0 {
        return Err(AudioError::AnechoicRoom(room.t60));
    }
    let alpha = 0.161 * room.volume() / (room.surface_area() * room.t60);
    if alpha >= 1.0 {
        warn!(
            "sabine absorption {alpha:.3} >= 1 for dims {:?}, t60 {}; clamping to 0.999",
            room.dims, room.t60
        );
        return Ok(0.999);
    }
    Ok(alpha)
}

/// Unit direction for spherical angles, x forward, y right, z up.
pub(crate) fn angles_to_direction(az_deg: f64, el_deg: f64) -> [f64; 3] {
    let az = az_deg.to_radians();
    let el = el_deg.to_radians();
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Spherical angles in degrees for a unit direction.
pub(crate) fn direction_to_angles(d: [f64; 3]) -> (f64, f64) {
    let az = d[1].atan2(d[0]).to_degrees();
    let el = d[2].clamp(-1.0, 1.0).asin().to_degrees();
    (az, el)
}

/// World direction expressed in the head frame (inverse yaw, then inverse pitch).
pub(crate) fn to_head_frame(d: [f64; 3], head: HeadPose) -> [f64; 3] {
    let (sy, cy) = (-head.yaw_deg.to_radians()).sin_cos();
    let yawed = [cy * d[0] - sy * d[1], sy * d[0] + cy * d[1], d[2]];
    let (sp, cp) = (-head.pitch_deg.to_radians()).sin_cos();
    [
        cp * yawed[0] - sp * yawed[2],
        yawed[1],
        sp * yawed[0] + cp * yawed[2],
    ]
}

/// Default enumeration depth: deep enough that the image tail reaches c * t60.
pub fn default_max_order(room: &RoomSpec) -> u32 {
    let min_dim = room.dims.iter().cloned().fold(f64::INFINITY, f64::min);
    let diag = (room.dims[0].powi(2) + room.dims[1].powi(2) + room.dims[2].powi(2)).sqrt();
    ((room.speed_of_sound * room.t60 + diag) / min_dim).ceil() as u32
}

/// All mirror images of `talker` up to `max_order` reflections, with gains,
/// delays and head-relative DOAs for a listener at `listener`.
///
/// Images whose delay exceeds 2 * t60 are pruned (the decay tail past that
/// point is below audibility for the rendering used here).
pub fn enumerate_image_sources(
    room: &RoomSpec,
    listener: [f64; 3],
    talker: [f64; 3],
    head: HeadPose,
    max_order: Option<u32>,
) -> Result<Vec<ImageSource>, AudioError> {
    let alpha = sabine_absorption(room)?;
    if !room.contains(talker) {
        return Err(AudioError::TalkerOutsideRoom(talker));
    }
    let beta = (1.0 - alpha).sqrt();
    let c = room.speed_of_sound;
    let order = max_order.unwrap_or_else(|| default_max_order(room)) as i64;
    let delay_cap = 2.0 * room.t60;
    let mut pruned = 0usize;

    // Mirror positions along one axis: m even -> m*l + x, m odd -> m*l + (l - x).
    let axis_pos = |m: i64, x: f64, l: f64| -> f64 {
        if m % 2 == 0 {
            m as f64 * l + x
        } else {
            m as f64 * l + (l - x)
        }
    };

    let mut out = Vec::new();
    for mx in -order..=order {
        let rem_x = order - mx.abs();
        let px = axis_pos(mx, talker[0], room.dims[0]);
        for my in -rem_x..=rem_x {
            let rem_y = rem_x - my.abs();
            let py = axis_pos(my, talker[1], room.dims[1]);
            for mz in -rem_y..=rem_y {
                let pz = axis_pos(mz, talker[2], room.dims[2]);
                let d = [px - listener[0], py - listener[1], pz - listener[2]];
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r < 1e-9 {
                    return Err(AudioError::TalkerOutsideRoom(talker));
                }
                let delay = r / c;
                if delay > delay_cap {
                    pruned += 1;
                    continue;
                }
                let n = (mx.abs() + my.abs() + mz.abs()) as u32;
                let dir = [d[0] / r, d[1] / r, d[2] / r];
                let doa = direction_to_angles(to_head_frame(dir, head));
                out.push(ImageSource {
                    position: [px, py, pz],
                    order: n,
                    gain: beta.powi(n as i32) / r,
                    delay_s: delay,
                    doa_deg: doa,
                });
            }
        }
    }
    if pruned > 0 {
        warn!("pruned {pruned} image sources with delay beyond 2*t60 = {delay_cap:.3} s");
    }
    Ok(out)
}
