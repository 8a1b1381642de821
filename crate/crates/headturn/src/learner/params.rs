//! Network shape and flat parameter storage.
//!
//! All weights live in one flat vector so the optimizer, target updates and
//! checkpoints treat the network as a single array; the layout hands out
//! index ranges for each block. Per layer the blocks are the input kernel
//! (3H x Fin), recurrent kernel (3H x H) and the two bias vectors (3H each),
//! gates ordered reset, update, candidate; the output head is (A x Hin) plus
//! bias. With no recurrent layers the head reads the last input frame, which
//! keeps a linear-only configuration available for exact gradient tests.

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, NdFloat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LearnerError;

pub const N_ACTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct NetLayout {
    pub feature_dim: usize,
    /// Hidden size per recurrent layer, input to output.
    pub hidden: Vec<usize>,
    /// One rate per layer: applied to that layer's output sequence, except
    /// the last, which is applied to the final hidden state before the head.
    pub dropout: Vec<f64>,
    pub n_actions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruRanges {
    pub w_ih: Range<usize>,
    pub w_hh: Range<usize>,
    pub b_ih: Range<usize>,
    pub b_hh: Range<usize>,
}

impl NetLayout {
    pub fn new(
        feature_dim: usize,
        hidden: Vec<usize>,
        dropout: Vec<f64>,
        n_actions: usize,
    ) -> Result<Self, LearnerError> {
        if feature_dim == 0 || n_actions == 0 {
            return Err(LearnerError::BadConfig("zero feature or action dimension".into()));
        }
        if dropout.len() != hidden.len() {
            return Err(LearnerError::BadConfig(format!(
                "{} dropout rates for {} layers",
                dropout.len(),
                hidden.len()
            )));
        }
        if hidden.contains(&0) {
            return Err(LearnerError::BadConfig("zero-size hidden layer".into()));
        }
        if dropout.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(LearnerError::BadConfig("dropout rate outside [0, 1)".into()));
        }
        Ok(Self { feature_dim, hidden, dropout, n_actions })
    }

    pub fn full_scale(feature_dim: usize) -> Self {
        Self::new(feature_dim, vec![512, 256, 128, 64], vec![0.2, 0.2, 0.2, 0.5], N_ACTIONS)
            .expect("static config")
    }

    pub fn desk(feature_dim: usize) -> Self {
        Self::new(feature_dim, vec![64, 32], vec![0.2, 0.5], N_ACTIONS).expect("static config")
    }

    pub fn n_layers(&self) -> usize {
        self.hidden.len()
    }

    /// Input width of recurrent layer `l`.
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.feature_dim
        } else {
            self.hidden[l - 1]
        }
    }

    /// Input width of the output head.
    pub fn head_input(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.feature_dim)
    }

    fn layer_len(&self, l: usize) -> usize {
        let (h, fin) = (self.hidden[l], self.layer_input(l));
        3 * h * fin + 3 * h * h + 3 * h + 3 * h
    }

    fn layer_offset(&self, l: usize) -> usize {
        (0..l).map(|i| self.layer_len(i)).sum()
    }

    pub fn gru(&self, l: usize) -> GruRanges {
        let (h, fin) = (self.hidden[l], self.layer_input(l));
        let o = self.layer_offset(l);
        let w_ih = o..o + 3 * h * fin;
        let w_hh = w_ih.end..w_ih.end + 3 * h * h;
        let b_ih = w_hh.end..w_hh.end + 3 * h;
        let b_hh = b_ih.end..b_ih.end + 3 * h;
        GruRanges { w_ih, w_hh, b_ih, b_hh }
    }

    pub fn head_w(&self) -> Range<usize> {
        let o = self.layer_offset(self.n_layers());
        o..o + self.n_actions * self.head_input()
    }

    pub fn head_b(&self) -> Range<usize> {
        let w = self.head_w();
        w.end..w.end + self.n_actions
    }

    pub fn n_params(&self) -> usize {
        self.head_b().end
    }
}

pub(crate) fn view2<F: NdFloat>(
    flat: &Array1<F>,
    r: Range<usize>,
    shape: (usize, usize),
) -> ArrayView2<'_, F> {
    ArrayView2::from_shape(shape, &flat.as_slice().expect("contiguous params")[r])
        .expect("range matches shape")
}

pub(crate) fn view1<F: NdFloat>(flat: &Array1<F>, r: Range<usize>) -> ArrayView1<'_, F> {
    ArrayView1::from(&flat.as_slice().expect("contiguous params")[r])
}

/// Random orthogonal matrix via modified Gram-Schmidt QR of a Gaussian
/// sample, sign-fixed so the factorization is unique.
fn orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut a = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal));
    for j in 0..n {
        // Two passes keep the columns orthogonal to machine precision.
        for _ in 0..2 {
            for k in 0..j {
                let proj: f64 = (0..n).map(|i| a[[i, j]] * a[[i, k]]).sum();
                for i in 0..n {
                    a[[i, j]] -= proj * a[[i, k]];
                }
            }
        }
        let norm: f64 = (0..n).map(|i| a[[i, j]] * a[[i, j]]).sum::<f64>().sqrt();
        // A zero column has probability zero; re-seed rather than divide by it.
        assert!(norm > 1e-12, "degenerate Gaussian sample");
        let sign = if a[[j, j]] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            a[[i, j]] *= sign / norm;
        }
    }
    a
}

/// Seeded initialization: uniform fan-in input kernels and head, orthogonal
/// recurrent kernels (per gate), zero biases.
pub fn init_params<F: NdFloat>(layout: &NetLayout, rng: &mut ChaCha8Rng) -> Array1<F> {
    let mut flat = Array1::zeros(layout.n_params());
    let slice = flat.as_slice_mut().expect("contiguous params");
    for l in 0..layout.n_layers() {
        let (h, fin) = (layout.hidden[l], layout.layer_input(l));
        let ranges = layout.gru(l);
        let bound = 1.0 / (fin as f64).sqrt();
        for v in &mut slice[ranges.w_ih] {
            *v = F::from(rng.gen_range(-bound..bound)).unwrap();
        }
        for gate in 0..3 {
            let q = orthogonal(h, rng);
            let base = ranges.w_hh.start + gate * h * h;
            for i in 0..h {
                for j in 0..h {
                    slice[base + i * h + j] = F::from(q[[i, j]]).unwrap();
                }
            }
        }
    }
    let bound = 1.0 / (layout.head_input() as f64).sqrt();
    for v in &mut slice[layout.head_w()] {
        *v = F::from(rng.gen_range(-bound..bound)).unwrap();
    }
    flat
}

/// theta_target <- tau * theta + (1 - tau) * theta_target.
pub fn soft_update<F: NdFloat>(target: &mut Array1<F>, params: &Array1<F>, tau: f64) {
    let t = F::from(tau).unwrap();
    let one = F::one();
    target.zip_mut_with(params, |tg, &p| *tg = t * p + (one - t) * *tg);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn layout_counts_parameters() {
        // One layer H=2, Fin=3: w_ih 18, w_hh 12, biases 12; head 2x2+2.
        let l = NetLayout::new(3, vec![2], vec![0.0], 2).unwrap();
        assert_eq!(l.n_params(), 18 + 12 + 12 + 4 + 2);
        assert_eq!(l.gru(0).w_ih, 0..18);
        assert_eq!(l.gru(0).b_hh.end, 42);
        assert_eq!(l.head_w(), 42..46);
        assert_eq!(l.head_b(), 46..48);
    }

    #[test]
    fn linear_only_layout() {
        let l = NetLayout::new(5, vec![], vec![], 8).unwrap();
        assert_eq!(l.head_input(), 5);
        assert_eq!(l.n_params(), 48);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(NetLayout::new(0, vec![2], vec![0.0], 8).is_err());
        assert!(NetLayout::new(4, vec![2], vec![], 8).is_err());
        assert!(NetLayout::new(4, vec![2], vec![1.0], 8).is_err());
        assert!(NetLayout::new(4, vec![0], vec![0.0], 8).is_err());
    }

    #[test]
    fn full_scale_matches_architecture() {
        let l = NetLayout::full_scale(128);
        assert_eq!(l.hidden, vec![512, 256, 128, 64]);
        assert_eq!(l.dropout, vec![0.2, 0.2, 0.2, 0.5]);
        assert_eq!(l.n_actions, 8);
        assert_eq!(l.head_input(), 64);
    }

    #[test]
    fn orthogonal_has_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 3, 16] {
            let q = orthogonal(n, &mut rng);
            let qtq = q.t().dot(&q);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(qtq[[i, j]], want, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let layout = NetLayout::new(6, vec![4, 3], vec![0.1, 0.2], 8).unwrap();
        let a: Array1<f64> = init_params(&layout, &mut ChaCha8Rng::seed_from_u64(1));
        let b: Array1<f64> = init_params(&layout, &mut ChaCha8Rng::seed_from_u64(1));
        let c: Array1<f64> = init_params(&layout, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), layout.n_params());
        // Biases zero.
        let r = layout.gru(0);
        assert!(a.as_slice().unwrap()[r.b_ih.start..r.b_hh.end].iter().all(|&v| v == 0.0));
        // Recurrent kernel rows are unit norm (orthogonal per gate).
        let w_hh = view2(&a, r.w_hh, (12, 4));
        for gate in 0..3 {
            for row in 0..4 {
                let norm: f64 = (0..4).map(|c| w_hh[[gate * 4 + row, c]].powi(2)).sum();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn soft_update_blends() {
        let p = Array1::from(vec![1.0f64, 1.0]);
        let mut t = Array1::from(vec![0.0f64, 0.0]);
        soft_update(&mut t, &p, 0.00005);
        assert_abs_diff_eq!(t[0], 0.00005, epsilon = 1e-15);
        soft_update(&mut t, &p, 1.0);
        assert_eq!(t, p);
        let before = t.clone();
        soft_update(&mut t, &Array1::from(vec![9.0, 9.0]), 0.0);
        assert_eq!(t, before);
    }
}
