//! Overlap-add FFT convolution.
//!
//! Blocks of the input are zero-padded to the FFT size, multiplied with the
//! precomputed impulse-response spectrum and accumulated into the output.
//! For fixed inputs the result is bit-for-bit reproducible: block size,
//! FFT plan and summation order depend only on the input lengths.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AudioError;

/// Full linear convolution of `signal` with `ir`, length `n + m - 1`.
pub fn fft_convolve(signal: &[f64], ir: &[f64]) -> Result<Vec<f64>, AudioError> {
    if signal.is_empty() {
        return Err(AudioError::EmptyInput("signal"));
    }
    if ir.is_empty() {
        return Err(AudioError::EmptyInput("ir"));
    }
    let out_len = signal
        .len()
        .checked_add(ir.len())
        .and_then(|v| v.checked_sub(1))
        .ok_or(AudioError::LengthOverflow {
            signal: signal.len(),
            ir: ir.len(),
        })?;

    let m = ir.len();
    // FFT size: at least 4x the kernel, never tiny. block = fft_size - m + 1.
    let fft_size = (4 * m).next_power_of_two().max(256);
    let block = fft_size - m + 1;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_size);
    let inv = planner.plan_fft_inverse(fft_size);

    let mut ir_spec: Vec<Complex<f64>> = ir
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_size)
        .collect();
    fwd.process(&mut ir_spec);

    let scale = 1.0 / fft_size as f64;
    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];

    for (bi, chunk) in signal.chunks(block).enumerate() {
        for (dst, &src) in buf.iter_mut().zip(chunk.iter()) {
            *dst = Complex::new(src, 0.0);
        }
        for dst in buf.iter_mut().skip(chunk.len()) {
            *dst = Complex::new(0.0, 0.0);
        }
        fwd.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(ir_spec.iter()) {
            *b *= h;
        }
        inv.process(&mut buf);

        let start = bi * block;
        let take = (out_len - start).min(fft_size);
        for (o, b) in out[start..start + take].iter_mut().zip(buf.iter()) {
            *o += b.re * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-9;

    /// O(n*m) reference kept deliberately separate from the FFT route.
    fn direct_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len() + h.len() - 1];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                y[i + j] += xi * hj;
            }
        }
        y
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn small_known_case() {
        let y = fft_convolve(&[1.0, 2.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(y.len(), 4);
        for (got, want) in y.iter().zip([1.0, 3.0, 5.0, 3.0]) {
            assert!((got - want).abs() < TOL);
        }
    }

    #[test]
    fn matches_direct_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = fft_convolve(&x, &h).unwrap();
        let slow = direct_convolve(&x, &h);
        assert!(max_abs_diff(&fast, &slow) <= TOL);
    }

    #[test]
    fn kernel_longer_than_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..900).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = fft_convolve(&x, &h).unwrap();
        assert!(max_abs_diff(&fast, &direct_convolve(&x, &h)) <= TOL);
    }

    #[test]
    fn delta_is_identity() {
        let x = [0.5, -0.25, 1.0, 0.0, 2.0];
        let y = fft_convolve(&x, &[1.0]).unwrap();
        assert!(max_abs_diff(&y, &x) <= TOL);
    }

    #[test]
    fn shifted_delta_delays() {
        let x = [1.0, 2.0, 3.0];
        let y = fft_convolve(&x, &[0.0, 0.0, 1.0]).unwrap();
        assert!(max_abs_diff(&y, &[0.0, 0.0, 1.0, 2.0, 3.0]) <= TOL);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(fft_convolve(&[], &[1.0]).is_err());
        assert!(fft_convolve(&[1.0], &[]).is_err());
    }

    #[test]
    fn bit_identical_across_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..777).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..129).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = fft_convolve(&x, &h).unwrap();
        let b = fft_convolve(&x, &h).unwrap();
        assert_eq!(a, b, "same inputs must produce identical bits");
    }

    proptest! {
        #[test]
        fn linear_in_the_signal(
            n in 1usize..64,
            m in 1usize..16,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs = fft_convolve(&sum, &h).unwrap();
            let ra = fft_convolve(&a, &h).unwrap();
            let rb = fft_convolve(&b, &h).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (ra[i] + rb[i])).abs() < 1e-9);
            }
        }
    }
}
