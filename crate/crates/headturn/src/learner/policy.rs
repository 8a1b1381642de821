//! Action selection: linearly annealed epsilon-greedy over the Q head.

use ndarray::ArrayView1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Linear anneal from `start` to zero over `decay_episodes`, flat afterwards.
pub fn epsilon(episode: u64, start: f64, decay_episodes: u64) -> f64 {
    if decay_episodes == 0 {
        return 0.0;
    }
    (start * (1.0 - episode as f64 / decay_episodes as f64)).max(0.0)
}

/// Lowest index among the maxima, so ties break the same way everywhere.
pub fn greedy(q: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// One uniform draw decides explore-vs-exploit, a second picks the random
/// action. Greedy selection consumes no randomness, so epsilon = 0 keeps the
/// stream untouched only when the caller skips this entirely; during training
/// the draw order must stay fixed for reproducibility.
pub fn select_action(q: ArrayView1<f64>, eps: f64, rng: &mut ChaCha8Rng) -> usize {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        rng.gen_range(0..q.len())
    } else {
        greedy(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn epsilon_anneals_linearly() {
        assert_eq!(epsilon(0, 0.2, 30_000), 0.2);
        assert!((epsilon(15_000, 0.2, 30_000) - 0.1).abs() < 1e-12);
        assert_eq!(epsilon(30_000, 0.2, 30_000), 0.0);
        assert_eq!(epsilon(50_000, 0.2, 30_000), 0.0);
        assert_eq!(epsilon(10, 0.2, 0), 0.0);
    }

    #[test]
    fn zero_epsilon_is_greedy() {
        let q = array![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(q.view(), 0.0, &mut rng), 7);
        }
    }

    #[test]
    fn full_epsilon_is_uniform() {
        let q = array![9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 80_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            counts[select_action(q.view(), 1.0, &mut rng)] += 1;
        }
        // Binomial(n, 1/8): sd ~ 93, allow 4 sd.
        let expect = n as f64 / 8.0;
        for (a, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expect).abs() < 4.0 * (n as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt(),
                "action {a} drawn {c} times"
            );
        }
    }

    #[test]
    fn ties_break_to_the_lowest_index() {
        let q = array![3.0, 3.0, 3.0];
        assert_eq!(greedy(q.view()), 0);
    }

    #[test]
    fn greedy_ignores_positive_affine_rescaling() {
        let q = array![0.3, -1.2, 2.0, 1.9];
        let scaled = q.mapv(|v| 5.0 * v + 11.0);
        assert_eq!(greedy(q.view()), greedy(scaled.view()));
        assert_eq!(greedy(q.view()), 2);
    }
}
