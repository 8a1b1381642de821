//! TD targets and Huber loss.
//!
//! Targets come from the target network in eval mode: y = r for terminal
//! transitions, else r + gamma * max_a' Q(o', a'). The loss is the mean
//! Huber of the TD errors; `squared` switches to Huber(e)^2, the literal
//! reading of the training objective's notation, off by default.

use ndarray::{Array1, Array2, Array3, Axis, NdFloat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gru::{backward, forward, Mode};
use super::params::NetLayout;
use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdConfig {
    pub gamma: f64,
    pub delta: f64,
    pub squared: bool,
}

impl Default for TdConfig {
    fn default() -> Self {
        Self { gamma: 0.8, delta: 1.0, squared: false }
    }
}

/// One optimize step's worth of transitions, stacked.
#[derive(Debug, Clone)]
pub struct Batch<F> {
    pub obs: Array3<F>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
    pub next_obs: Array3<F>,
}

pub fn huber(e: f64, delta: f64) -> f64 {
    if e.abs() <= delta {
        0.5 * e * e
    } else {
        delta * (e.abs() - 0.5 * delta)
    }
}

pub fn huber_grad(e: f64, delta: f64) -> f64 {
    e.clamp(-delta, delta)
}

#[derive(Debug)]
pub struct TdLoss<F> {
    pub loss: f64,
    pub grads: Array1<F>,
    pub td_errors: Vec<f64>,
}

/// Loss and parameter gradients for one batch. `mode` controls dropout in
/// the online forward; the target forward is always eval.
pub fn td_loss<F: NdFloat>(
    layout: &NetLayout,
    params: &Array1<F>,
    target_params: &Array1<F>,
    batch: &Batch<F>,
    cfg: &TdConfig,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<TdLoss<F>, LearnerError> {
    let b = batch.actions.len();
    if b == 0 || batch.obs.dim().0 != b || batch.next_obs.dim().0 != b {
        return Err(LearnerError::ShapeMismatch {
            expected: format!("batch of {b}"),
            got: format!("obs {:?}, next {:?}", batch.obs.dim(), batch.next_obs.dim()),
        });
    }

    let mut eval_rng = ChaCha8Rng::seed_from_u64(0);
    let q_next =
        forward(layout, target_params, batch.next_obs.view(), Mode::Eval, &mut eval_rng)?.q;
    let cache = forward(layout, params, batch.obs.view(), mode, rng)?;

    let mut dq = Array2::<F>::zeros(cache.q.dim());
    let mut loss = 0.0;
    let mut td_errors = Vec::with_capacity(b);
    let inv_b = 1.0 / b as f64;
    for i in 0..b {
        let a = batch.actions[i];
        let y = if batch.terminal[i] {
            batch.rewards[i]
        } else {
            let best = q_next
                .index_axis(Axis(0), i)
                .iter()
                .fold(f64::NEG_INFINITY, |m, &v| m.max(v.to_f64().unwrap()));
            batch.rewards[i] + cfg.gamma * best
        };
        let e = cache.q[[i, a]].to_f64().unwrap() - y;
        td_errors.push(e);
        let (l, g) = if cfg.squared {
            let h = huber(e, cfg.delta);
            (h * h, 2.0 * h * huber_grad(e, cfg.delta))
        } else {
            (huber(e, cfg.delta), huber_grad(e, cfg.delta))
        };
        loss += l * inv_b;
        dq[[i, a]] = F::from(g * inv_b).unwrap();
    }

    let grads = backward(layout, params, &cache, &dq);
    Ok(TdLoss { loss, grads, td_errors })
}
