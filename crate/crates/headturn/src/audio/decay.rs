//! Reverberation time from the Schroeder backward-integrated energy curve.

use super::AudioError;

/// Estimates T60 by fitting the -5 dB to -25 dB span of the Schroeder curve
/// and extrapolating the slope to -60 dB.
pub fn estimate_t60_schroeder(ir: &[f64], sample_rate: f64) -> Result<f64, AudioError> {
    if sample_rate.is_nan() || sample_rate <= 0.0 {
        return Err(AudioError::BadSampleRate(sample_rate));
    }
    if ir.is_empty() {
        return Err(AudioError::EmptyInput("ir"));
    }
    // Reverse cumulative energy.
    let mut energy = vec![0.0; ir.len()];
    let mut acc = 0.0;
    for (i, &v) in ir.iter().enumerate().rev() {
        acc += v * v;
        energy[i] = acc;
    }
    let total = energy[0];
    if total <= 0.0 {
        return Err(AudioError::InsufficientDecay { span_db: 0.0 });
    }

    let db = |e: f64| 10.0 * (e / total).log10();
    let t5 = match energy.iter().position(|&e| db(e) <= -5.0) {
        Some(i) => i,
        None => return Err(AudioError::InsufficientDecay { span_db: 0.0 }),
    };
    // End of the fit: -25 dB crossing, or the last sample with energy left.
    let mut t_end = energy
        .iter()
        .position(|&e| db(e) <= -25.0)
        .unwrap_or(energy.len() - 1);
    // The crossing may land on the all-zero integration tail; the fit needs
    // finite dB values, so step back onto the last energetic sample.
    while t_end > t5 && energy[t_end] <= 0.0 {
        t_end -= 1;
    }
    let span_db = db(energy[t5]) - db(energy[t_end]);
    if span_db < 10.0 || t_end <= t5 {
        return Err(AudioError::InsufficientDecay { span_db });
    }

    // Least-squares line through (time, dB) over the fit span.
    let n = (t_end - t5 + 1) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for i in t5..=t_end {
        let x = i as f64 / sample_rate;
        let y = db(energy[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(AudioError::InsufficientDecay { span_db });
    }
    let slope = (n * sxy - sx * sy) / denom;
    if slope >= 0.0 {
        return Err(AudioError::InsufficientDecay { span_db });
    }
    Ok(-60.0 / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy_decay(t60: f64, fs: f64, dur: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..(dur * fs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                // 60 dB amplitude decay over t60: factor e^(-ln(1000) t / t60).
                let env = (-6.907755 * t / t60).exp();
                rng.gen_range(-1.0..1.0) * env
            })
            .collect()
    }

    #[test]
    fn recovers_synthetic_t60() {
        for (t60, seed) in [(0.2, 1u64), (0.4, 2), (0.6, 3)] {
            let ir = noisy_decay(t60, 16000.0, t60 * 4.0, seed);
            let est = estimate_t60_schroeder(&ir, 16000.0).unwrap();
            assert!(
                (est - t60).abs() < 0.10 * t60,
                "target {t60}, estimated {est}"
            );
        }
    }

    #[test]
    fn single_impulse_is_insufficient() {
        let mut ir = vec![0.0; 256];
        ir[10] = 1.0;
        match estimate_t60_schroeder(&ir, 16000.0) {
            Err(AudioError::InsufficientDecay { .. }) => {}
            other => panic!("expected insufficient decay, got {other:?}"),
        }
    }

    #[test]
    fn shallow_decay_is_insufficient() {
        // Roughly flat noise never develops a 10 dB span below -5 dB
        // before the integration tail, except in the last few samples
        // where the fit span collapses.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ir: Vec<f64> = (0..64).map(|_| rng.gen_range(0.5..1.0)).collect();
        match estimate_t60_schroeder(&ir, 16000.0) {
            Err(AudioError::InsufficientDecay { .. }) => {}
            Ok(est) => {
                // A flat signal's backward integral is linear in time; the
                // -5..-25 dB region sits in the last samples. Accept only a
                // tiny estimate, anything else is a fit bug.
                assert!(est < 0.01, "flat noise produced t60 {est}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_energy_errors() {
        assert!(estimate_t60_schroeder(&[0.0; 128], 16000.0).is_err());
    }
}
