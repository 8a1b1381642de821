//! Central-difference verification of the analytic TD gradient. Run in eval
//! mode so dropout cannot perturb the comparison; f64 only, since f32
//! round-off drowns the differences at usable step sizes.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gru::Mode;
use super::loss::{td_loss, Batch, TdConfig};
use super::params::NetLayout;
use super::LearnerError;

#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_err: f64,
    /// Flat index of the parameter with the largest relative error.
    pub worst_param: usize,
    /// Parameters whose analytic or numeric derivative came out non-finite.
    pub non_finite: usize,
}

fn eval_loss(
    layout: &NetLayout,
    params: &Array1<f64>,
    target: &Array1<f64>,
    batch: &Batch<f64>,
    cfg: &TdConfig,
) -> Result<f64, LearnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(td_loss(layout, params, target, batch, cfg, Mode::Eval, &mut rng)?.loss)
}

/// Compare analytic gradients against (f(w+h) - f(w-h)) / 2h for every
/// parameter. Relative error uses a small absolute floor so parameters with
/// true zero gradient do not divide by zero.
pub fn gradient_check(
    layout: &NetLayout,
    params: &Array1<f64>,
    target: &Array1<f64>,
    batch: &Batch<f64>,
    cfg: &TdConfig,
    h: f64,
) -> Result<GradReport, LearnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let analytic = td_loss(layout, params, target, batch, cfg, Mode::Eval, &mut rng)?.grads;

    let mut w = params.clone();
    let mut report = GradReport { max_rel_err: 0.0, worst_param: 0, non_finite: 0 };
    for i in 0..w.len() {
        let orig = w[i];
        w[i] = orig + h;
        let up = eval_loss(layout, &w, target, batch, cfg)?;
        w[i] = orig - h;
        let down = eval_loss(layout, &w, target, batch, cfg)?;
        w[i] = orig;

        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        if !a.is_finite() || !numeric.is_finite() {
            report.non_finite += 1;
            continue;
        }
        let rel = (a - numeric).abs() / (a.abs().max(numeric.abs()) + 1e-6);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_param = i;
        }
    }
    Ok(report)
}
