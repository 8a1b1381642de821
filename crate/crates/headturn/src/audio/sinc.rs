//! 32-tap Kaiser-windowed sinc interpolation for fractional delays.
//!
//! Integer delays reproduce the input exactly: the kernel degenerates to a
//! unit impulse when the fractional part is zero.

pub(crate) const TAPS: usize = 32;
/// Kernel index i covers time offset i - CENTER.
pub(crate) const CENTER: i64 = 15;
const KAISER_BETA: f64 = 8.0;

fn bessel_i0(x: f64) -> f64 {
    // Power series; converges quickly for the argument range used here.
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..=30 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Interpolation kernel for a delay with fractional part `frac` in [0, 1).
pub(crate) fn kernel(frac: f64) -> [f64; TAPS] {
    let denom = bessel_i0(KAISER_BETA);
    let mut k = [0.0; TAPS];
    for (i, ki) in k.iter_mut().enumerate() {
        let t = (i as i64 - CENTER) as f64 - frac;
        let x = t / (CENTER as f64 + 1.0);
        if x.abs() <= 1.0 {
            let w = bessel_i0(KAISER_BETA * (1.0 - x * x).sqrt()) / denom;
            *ki = sinc(t) * w;
        }
    }
    k
}

/// Adds `gain * src` into `dst` at a fractional `delay` (in samples).
pub(crate) fn add_delayed(dst: &mut [f64], src: &[f64], delay: f64, gain: f64) {
    debug_assert!(delay >= 0.0);
    let n0 = delay.floor() as i64;
    let frac = delay - n0 as f64;
    let k = kernel(frac);
    add_delayed_with_kernel(dst, src, n0, &k, gain);
}

/// Same as [`add_delayed`] with a caller-supplied kernel (polyphase tables).
pub(crate) fn add_delayed_with_kernel(
    dst: &mut [f64],
    src: &[f64],
    integer_delay: i64,
    kernel: &[f64; TAPS],
    gain: f64,
) {
    let n = dst.len() as i64;
    for (i, &s) in src.iter().enumerate() {
        let v = s * gain;
        if v == 0.0 {
            continue;
        }
        let base = integer_delay + i as i64 - CENTER;
        let lo = (-base).max(0) as usize;
        let hi = ((n - base).min(TAPS as i64)).max(0) as usize;
        for (j, &kj) in kernel[lo..hi].iter().enumerate() {
            dst[(base + (lo + j) as i64) as usize] += v * kj;
        }
    }
}
