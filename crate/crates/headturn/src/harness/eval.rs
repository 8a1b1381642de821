//! Policy evaluation: stratified greedy rollouts of a trained checkpoint,
//! audio-free scripted and random baselines, and the cross-environment
//! generalization matrix.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{hash_mismatch_message, Checkpoint};
use super::config::RunConfig;
use super::HarnessError;
use crate::corpus::cache::{BrirCache, EnvId};
use crate::corpus::clips::ClipSet;
use crate::env::episode::EpisodeEngine;
use crate::env::features::FeatureExtractor;
use crate::env::grid::{chebyshev, od2_deg, Action, AngularGrid, GridCell};
use crate::env::reward::reachable_states;
use crate::learner::gru::q_eval;
use crate::learner::policy::greedy;

/// Aggregates over a batch of evaluation episodes. `success_rate` is in
/// percent; an episode succeeds when the head reaches the talker cell
/// within the step cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: u32,
    pub success_rate: f64,
    pub mean_final_chebyshev: f64,
    pub mean_episode_length: f64,
}

#[derive(Debug, Default)]
struct Tally {
    episodes: u32,
    successes: u32,
    chebyshev_sum: u64,
    length_sum: u64,
}

impl Tally {
    fn record(&mut self, success: bool, final_chebyshev: u32, length: u32) {
        self.episodes += 1;
        self.successes += success as u32;
        self.chebyshev_sum += final_chebyshev as u64;
        self.length_sum += length as u64;
    }

    fn metrics(&self) -> Metrics {
        let n = self.episodes as f64;
        Metrics {
            episodes: self.episodes,
            success_rate: 100.0 * self.successes as f64 / n,
            mean_final_chebyshev: self.chebyshev_sum as f64 / n,
            mean_episode_length: self.length_sum as f64 / n,
        }
    }
}

/// Greedy evaluation of a checkpoint, stratified over every talker start
/// cell with `eval.episodes_per_start` episodes each. Clips are drawn from
/// the evaluation RNG; action selection is deterministic, dropout-free, and
/// consumes no randomness. Evaluating on clips from a talker the checkpoint
/// was trained on is an error.
pub fn evaluate(
    cfg: &RunConfig,
    ckpt: &Checkpoint,
    clips: &ClipSet,
    cache: &BrirCache,
) -> Result<Metrics, HarnessError> {
    cfg.validate()?;
    if clips.clips.is_empty() {
        return Err(HarnessError::Data("evaluation clip set is empty".into()));
    }
    let overlap: Vec<&str> = clips
        .talkers()
        .into_iter()
        .filter(|t| ckpt.train_talkers.iter().any(|tr| tr == t))
        .collect();
    if !overlap.is_empty() {
        return Err(HarnessError::Config(format!(
            "evaluation clips share talkers with the training set: {}",
            overlap.join(", ")
        )));
    }
    if cache.env() != cfg.env {
        return Err(HarnessError::Config(format!(
            "BRIR cache is for {}, config evaluates on {}",
            cache.env().id(),
            cfg.env.id()
        )));
    }
    if ckpt.layout.feature_dim != cfg.features.dim() {
        return Err(HarnessError::Config(format!(
            "checkpoint expects {}-dim features, config produces {}",
            ckpt.layout.feature_dim,
            cfg.features.dim()
        )));
    }
    if !ckpt.matches_config(cfg) {
        log::warn!("{}", hash_mismatch_message(ckpt, cfg));
    }

    let engine = EpisodeEngine::new(
        cfg.grid,
        cfg.reward,
        cache,
        clips,
        FeatureExtractor::new(cfg.features),
        ckpt.normalizer.clone(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.eval.seed);
    let mut tally = Tally::default();
    for talker in cfg.grid.start_cells() {
        for _ in 0..cfg.eval.episodes_per_start {
            let clip_index = rng.gen_range(0..clips.clips.len());
            let (mut state, first) = engine.reset_at(talker, clip_index)?;
            let mut frames = first.frames;
            while !state.done {
                let q: Array1<f32> = q_eval(&ckpt.layout, &ckpt.params, &frames)?;
                let a = greedy(q.mapv(f64::from).view());
                let action = Action::from_index(a).expect("q head emits one value per action");
                let (_, next) = engine.step(&mut state, action)?;
                frames = next.frames;
            }
            let reached = od2_deg(state.talker, state.head) == 0;
            tally.record(reached, chebyshev(state.talker, state.head), state.t);
        }
    }
    Ok(tally.metrics())
}

/// Uniform-random policy rolled out without any audio synthesis; the motion
/// model, reward cap, and start distribution match the real environment, so
/// this is the chance floor for the learned policy.
pub fn random_baseline(grid: &AngularGrid, max_steps: usize, episodes: u32, seed: u64) -> Metrics {
    let starts = grid.start_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..episodes {
        let talker = starts[rng.gen_range(0..starts.len())];
        let mut head = GridCell::CENTER;
        let mut t: u32 = 0;
        let mut reached = false;
        while (t as usize) < max_steps {
            let action = Action::from_index(rng.gen_range(0..Action::ALL.len())).expect("in range");
            head = grid.apply(head, action);
            t += 1;
            if od2_deg(talker, head) == 0 {
                reached = true;
                break;
            }
        }
        tally.record(reached, chebyshev(talker, head), t);
    }
    tally.metrics()
}

/// Rolls a deterministic scripted policy out once from every start cell,
/// audio-free. The policy sees the true talker and head cells, so this is
/// an upper bound, not something a listener could do.
pub fn scripted_metrics(
    grid: &AngularGrid,
    max_steps: usize,
    policy: impl Fn(GridCell, GridCell) -> Action,
) -> Metrics {
    let mut tally = Tally::default();
    for talker in grid.start_cells() {
        let mut head = GridCell::CENTER;
        let mut t: u32 = 0;
        let mut reached = false;
        while (t as usize) < max_steps {
            head = grid.apply(head, policy(talker, head));
            t += 1;
            if od2_deg(talker, head) == 0 {
                reached = true;
                break;
            }
        }
        tally.record(reached, chebyshev(talker, head), t);
    }
    tally.metrics()
}

/// The oracle move: the action whose landing cell minimizes the squared
/// deviation, ties broken toward the lowest action index.
pub fn argmin_od_action(grid: &AngularGrid, talker: GridCell, head: GridCell) -> Action {
    reachable_states(grid, head)
        .iter()
        .min_by_key(|(_, next)| od2_deg(talker, *next))
        .map(|(a, _)| *a)
        .expect("eight actions")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub trained_on: EnvId,
    pub tested_on: EnvId,
    pub metrics: Metrics,
}

/// Evaluates every checkpoint against every acoustic environment with one
/// shared evaluation seed, so rows differ only in the acoustics.
pub fn generalization_matrix(
    cfg: &RunConfig,
    checkpoints: &[(EnvId, Checkpoint)],
    caches: &[BrirCache],
    clips: &ClipSet,
) -> Result<Vec<GeneralizationRow>, HarnessError> {
    let mut rows = Vec::with_capacity(checkpoints.len() * caches.len());
    for (trained_on, ckpt) in checkpoints {
        for cache in caches {
            let mut eval_cfg = cfg.clone();
            eval_cfg.env = cache.env();
            let metrics = evaluate(&eval_cfg, ckpt, clips, cache)?;
            rows.push(GeneralizationRow { trained_on: *trained_on, tested_on: cache.env(), metrics });
        }
    }
    Ok(rows)
}
