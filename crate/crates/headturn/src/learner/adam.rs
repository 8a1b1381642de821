//! AdamW with optional global-norm gradient clipping.
//!
//! Weight decay is decoupled from the moment estimates. A batch whose
//! gradients contain a non-finite value is skipped entirely (counted in
//! `skipped`) rather than poisoning the parameters.

use ndarray::{Array1, NdFloat, Zip};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01, clip_norm: Some(10.0) }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub m: Array1<F>,
    pub v: Array1<F>,
    pub t: u64,
    pub skipped: u64,
}

pub fn global_norm<F: NdFloat>(g: &Array1<F>) -> f64 {
    g.iter().map(|&v| v.to_f64().unwrap().powi(2)).sum::<f64>().sqrt()
}

impl<F: NdFloat> Adam<F> {
    pub fn new(n_params: usize) -> Self {
        Self { m: Array1::zeros(n_params), v: Array1::zeros(n_params), t: 0, skipped: 0 }
    }

    /// Applies one update in place; returns false when the batch was skipped
    /// for non-finite gradients.
    pub fn step(&mut self, params: &mut Array1<F>, grads: &Array1<F>, cfg: &AdamConfig) -> bool {
        if grads.iter().any(|v| !v.is_finite()) {
            self.skipped += 1;
            return false;
        }
        let norm = global_norm(grads);
        let scale = match cfg.clip_norm {
            Some(c) if norm > c => F::from(c / norm).unwrap(),
            _ => F::one(),
        };

        self.t += 1;
        let t = self.t as i32;
        let b1 = F::from(cfg.beta1).unwrap();
        let b2 = F::from(cfg.beta2).unwrap();
        let lr = F::from(cfg.lr).unwrap();
        let eps = F::from(cfg.eps).unwrap();
        let bc1 = F::one() - F::from(cfg.beta1).unwrap().powi(t);
        let bc2 = F::one() - F::from(cfg.beta2).unwrap().powi(t);
        let decay = F::one() - F::from(cfg.lr * cfg.weight_decay).unwrap();
        let one = F::one();

        Zip::from(&mut *params)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grads)
            .for_each(|p, m, v, &g0| {
                let g = g0 * scale;
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p = *p * decay - lr * m_hat / (v_hat.sqrt() + eps);
            });
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg_no_decay() -> AdamConfig {
        AdamConfig { weight_decay: 0.0, clip_norm: None, ..AdamConfig::default() }
    }

    #[test]
    fn zero_gradients_leave_parameters_alone() {
        let mut p = Array1::from(vec![1.0f64, -2.0]);
        let mut opt = Adam::new(2);
        for _ in 0..3 {
            assert!(opt.step(&mut p, &Array1::zeros(2), &cfg_no_decay()));
        }
        assert_eq!(p, Array1::from(vec![1.0, -2.0]));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Array1::from(vec![0.0f64]);
        let mut opt = Adam::new(1);
        opt.step(&mut p, &Array1::from(vec![1.0]), &cfg_no_decay());
        // Bias-corrected moment ratio is 1 at t=1, so the step is ~lr.
        assert_abs_diff_eq!(p[0], -0.001, epsilon = 1e-6);
    }

    #[test]
    fn decoupled_decay_shrinks_geometrically() {
        let cfg = AdamConfig { weight_decay: 0.5, clip_norm: None, ..AdamConfig::default() };
        let mut p = Array1::from(vec![2.0f64]);
        let mut opt = Adam::new(1);
        for _ in 0..4 {
            opt.step(&mut p, &Array1::zeros(1), &cfg);
        }
        assert_abs_diff_eq!(p[0], 2.0 * (1.0 - 0.001 * 0.5f64).powi(4), epsilon = 1e-12);
    }

    #[test]
    fn clipping_matches_pre_scaled_gradients() {
        let g = Array1::from(vec![30.0f64, 40.0]); // norm 50
        let cfg = AdamConfig { clip_norm: Some(10.0), weight_decay: 0.0, ..AdamConfig::default() };
        let mut p1 = Array1::from(vec![1.0f64, 1.0]);
        let mut o1 = Adam::new(2);
        o1.step(&mut p1, &g, &cfg);

        let mut p2 = Array1::from(vec![1.0f64, 1.0]);
        let mut o2 = Adam::new(2);
        o2.step(&mut p2, &(&g * 0.2), &cfg_no_decay());
        assert_abs_diff_eq!(p1[0], p2[0], epsilon = 1e-12);
        assert_abs_diff_eq!(p1[1], p2[1], epsilon = 1e-12);
    }

    #[test]
    fn small_gradients_are_not_clipped() {
        let g = Array1::from(vec![0.3f64, 0.4]);
        let cfg = AdamConfig { clip_norm: Some(10.0), weight_decay: 0.0, ..AdamConfig::default() };
        let mut p1 = Array1::from(vec![0.0f64, 0.0]);
        let mut o1 = Adam::new(2);
        o1.step(&mut p1, &g, &cfg);
        let mut p2 = Array1::from(vec![0.0f64, 0.0]);
        let mut o2 = Adam::new(2);
        o2.step(&mut p2, &g, &cfg_no_decay());
        assert_eq!(p1, p2);
    }

    #[test]
    fn non_finite_gradients_skip_the_update() {
        let mut p = Array1::from(vec![1.0f64]);
        let mut opt = Adam::new(1);
        assert!(!opt.step(&mut p, &Array1::from(vec![f64::NAN]), &cfg_no_decay()));
        assert!(!opt.step(&mut p, &Array1::from(vec![f64::INFINITY]), &cfg_no_decay()));
        assert_eq!(p[0], 1.0);
        assert_eq!(opt.skipped, 2);
        assert_eq!(opt.t, 0);
    }
}
