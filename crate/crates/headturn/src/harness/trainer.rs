//! The training loop: interact, store, optimize, blend the target net, log,
//! checkpoint. Single-threaded and bit-reproducible given a RunConfig; every
//! random draw comes from one ChaCha stream in a fixed order.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{hash_mismatch_message, Checkpoint};
use super::config::{write_atomic, RunConfig};
use super::HarnessError;
use crate::corpus::cache::BrirCache;
use crate::corpus::clips::{ClipSet, Split};
use crate::env::episode::EpisodeEngine;
use crate::env::features::{FeatureExtractor, Normalizer};
use crate::env::grid::{chebyshev, Action};
use crate::learner::adam::{Adam, AdamConfig};
use crate::learner::gru::{q_eval, Mode};
use crate::learner::loss::{td_loss, TdConfig};
use crate::learner::params::{init_params, soft_update};
use crate::learner::policy::{epsilon, select_action};
use crate::learner::replay::{batch_from, ReplayBuffer, Transition};

pub const CHECKPOINT_FILE: &str = "checkpoint.htqn";
pub const LOG_FILE: &str = "training_log.csv";
pub const CONFIG_FILE: &str = "run_config.json";
const LOG_HEADER: &str = "episode,length,total_reward,final_chebyshev,mean_loss,epsilon";

/// One training episode's log line. Serialization must stay wall-clock-free
/// so identical runs produce identical logs.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode: u64,
    pub length: u32,
    pub total_reward: f64,
    pub final_chebyshev: u32,
    /// Mean TD loss over the episode's optimize steps; absent before the
    /// buffer holds a full batch.
    pub mean_loss: Option<f64>,
    pub epsilon: f64,
}

impl EpisodeRow {
    fn to_csv(&self) -> String {
        let loss = self.mean_loss.map(|l| l.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.episode, self.length, self.total_reward, self.final_chebyshev, loss, self.epsilon
        )
    }

    fn parse(line: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::Data(format!("bad training log line: {line:?}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        Ok(Self {
            episode: f[0].parse().map_err(|_| bad())?,
            length: f[1].parse().map_err(|_| bad())?,
            total_reward: f[2].parse().map_err(|_| bad())?,
            final_chebyshev: f[3].parse().map_err(|_| bad())?,
            mean_loss: if f[4].is_empty() { None } else { Some(f[4].parse().map_err(|_| bad())?) },
            epsilon: f[5].parse().map_err(|_| bad())?,
        })
    }
}

pub fn write_log(path: &Path, rows: &[EpisodeRow]) -> Result<(), HarnessError> {
    let mut text = String::from(LOG_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_log(path: &Path) -> Result<Vec<EpisodeRow>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(HarnessError::Data(format!("{}: unrecognized log header", path.display())));
    }
    lines.map(EpisodeRow::parse).collect()
}

#[derive(Debug)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpisodeRow>,
    /// Episode the run resumed from; None for a fresh start.
    pub resumed_from: Option<u64>,
}

/// Runs (or resumes, or reloads a finished run of) the configured training.
/// Artifacts land in `out_dir`: run_config.json, training_log.csv,
/// checkpoint.htqn, and an episode-stamped snapshot at each periodic save.
/// The replay buffer is not checkpointed; a resume refills it by fresh
/// interaction, so only the RNG stream is bit-continuous across a resume.
pub fn train(
    cfg: &RunConfig,
    clips: &ClipSet,
    cache: &BrirCache,
    out_dir: &Path,
) -> Result<TrainResult, HarnessError> {
    cfg.validate()?;
    if clips.split != Split::Train {
        return Err(HarnessError::Config("training requires the train clip split".into()));
    }
    if clips.clips.is_empty() {
        return Err(HarnessError::Data("training clip set is empty".into()));
    }
    if cache.env() != cfg.env {
        return Err(HarnessError::Config(format!(
            "BRIR cache is for {}, config trains on {}",
            cache.env().id(),
            cfg.env.id()
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    cfg.save(&out_dir.join(CONFIG_FILE))?;

    let feature_dim = cfg.features.dim();
    let layout = cfg.net.layout(feature_dim)?;
    let talkers: Vec<String> = clips.talkers().iter().map(|t| t.to_string()).collect();

    let ckpt_path = out_dir.join(CHECKPOINT_FILE);
    let log_path = out_dir.join(LOG_FILE);

    // Fresh state or a resume from the latest checkpoint in out_dir.
    let (mut rng, mut params, mut target, mut adam, normalizer, start_episode, mut log, resumed_from);
    if ckpt_path.exists() {
        let ckpt = Checkpoint::load(&ckpt_path)?;
        if !ckpt.matches_config(cfg) {
            return Err(HarnessError::Config(hash_mismatch_message(&ckpt, cfg)));
        }
        if ckpt.train_talkers != talkers {
            return Err(HarnessError::Config(
                "checkpoint was trained on a different talker set".into(),
            ));
        }
        let mut rows = read_log(&log_path)?;
        if (rows.len() as u64) < ckpt.episode {
            return Err(HarnessError::Data(format!(
                "training log has {} rows but checkpoint is at episode {}",
                rows.len(),
                ckpt.episode
            )));
        }
        rows.truncate(ckpt.episode as usize);
        if ckpt.episode == cfg.train.episodes {
            return Ok(TrainResult { checkpoint: ckpt, log: rows, resumed_from: None });
        }
        rng = ckpt.rng();
        params = ckpt.params;
        target = ckpt.target;
        adam = ckpt.adam;
        normalizer = ckpt.normalizer;
        start_episode = ckpt.episode;
        resumed_from = Some(ckpt.episode);
        log = rows;
    } else {
        rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // Draw order is part of the determinism contract: normalizer
        // rollouts first, then weight init, then the episode loop.
        let probe = EpisodeEngine::new(
            cfg.grid,
            cfg.reward,
            cache,
            clips,
            FeatureExtractor::new(cfg.features),
            Normalizer::identity(feature_dim),
        );
        normalizer = fit_normalizer(&probe, cfg.train.normalizer_episodes, &mut rng)?;
        params = init_params(&layout, &mut rng);
        target = params.clone();
        adam = Adam::new(layout.n_params());
        start_episode = 0;
        resumed_from = None;
        log = Vec::new();
    }

    let engine = EpisodeEngine::new(
        cfg.grid,
        cfg.reward,
        cache,
        clips,
        FeatureExtractor::new(cfg.features),
        normalizer.clone(),
    );
    let mut replay = ReplayBuffer::new(cfg.train.replay_ring_capacity);
    let td_cfg = TdConfig {
        gamma: cfg.train.gamma,
        delta: cfg.train.huber_delta,
        squared: cfg.train.squared_huber,
    };
    let adam_cfg = AdamConfig {
        lr: cfg.train.learning_rate,
        weight_decay: cfg.train.weight_decay,
        clip_norm: cfg.train.grad_clip,
        ..AdamConfig::default()
    };

    let snapshot = |episode: u64,
                    rng: &ChaCha8Rng,
                    params: &ndarray::Array1<f32>,
                    target: &ndarray::Array1<f32>,
                    adam: &Adam<f32>,
                    normalizer: &Normalizer| Checkpoint {
        config_hash: cfg.hash(),
        episode,
        rng_seed: rng.get_seed(),
        rng_stream: rng.get_stream(),
        rng_word_pos: rng.get_word_pos(),
        layout: layout.clone(),
        params: params.clone(),
        target: target.clone(),
        adam: adam.clone(),
        normalizer: normalizer.clone(),
        train_talkers: talkers.clone(),
    };

    let mut actions_taken: u64 = 0;
    for episode in start_episode..cfg.train.episodes {
        let eps = epsilon(episode, cfg.train.eps_start, cfg.train.eps_decay_episodes);
        let (mut state, first_obs) = engine.reset(&mut rng)?;
        let mut obs = Arc::new(first_obs.frames);
        let mut key = first_obs.deviation;
        let mut total_reward = 0.0;
        let mut losses = Vec::new();

        while !state.done {
            let q = q_eval(&layout, &params, &obs)?;
            let q64 = q.mapv(f64::from);
            let a = select_action(q64.view(), eps, &mut rng);
            let action = Action::from_index(a).expect("q head emits one value per action");
            let (reward, next) = engine.step(&mut state, action)?;
            let next_frames = Arc::new(next.frames);
            replay.push(Transition {
                obs: Arc::clone(&obs),
                action: a as u8,
                reward,
                next_obs: Arc::clone(&next_frames),
                terminal: state.done,
                key,
            });
            obs = next_frames;
            key = next.deviation;
            total_reward += reward;
            actions_taken += 1;

            if replay.len() >= cfg.train.batch_size
                && actions_taken.is_multiple_of(cfg.train.optimize_every as u64)
            {
                let sample = replay.sample(cfg.train.batch_size, &mut rng)?;
                let batch = batch_from(&sample);
                let out = td_loss(&layout, &params, &target, &batch, &td_cfg, Mode::Train, &mut rng)?;
                adam.step(&mut params, &out.grads, &adam_cfg);
                soft_update(&mut target, &params, cfg.train.tau);
                losses.push(out.loss);
            }
        }

        log.push(EpisodeRow {
            episode,
            length: state.t,
            total_reward,
            final_chebyshev: chebyshev(state.talker, state.head),
            mean_loss: (!losses.is_empty())
                .then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            epsilon: eps,
        });

        let done_episodes = episode + 1;
        if done_episodes % cfg.train.checkpoint_every == 0 && done_episodes != cfg.train.episodes {
            let ckpt = snapshot(done_episodes, &rng, &params, &target, &adam, &normalizer);
            ckpt.save(&ckpt_path)?;
            ckpt.save(&out_dir.join(format!("checkpoint_ep{done_episodes:06}.htqn")))?;
            write_log(&log_path, &log)?;
        }
    }

    let final_ckpt =
        snapshot(cfg.train.episodes, &rng, &params, &target, &adam, &normalizer);
    final_ckpt.save(&ckpt_path)?;
    write_log(&log_path, &log)?;
    Ok(TrainResult { checkpoint: final_ckpt, log, resumed_from })
}

/// Per-dimension feature statistics from short random rollouts, taken before
/// any learning so every stored and evaluated observation shares one scaling.
fn fit_normalizer(
    probe: &EpisodeEngine,
    episodes: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Normalizer, HarnessError> {
    let mut frames = Vec::new();
    for _ in 0..episodes {
        let (mut state, obs) = probe.reset(rng)?;
        frames.push(obs.frames.mapv(f64::from));
        for _ in 0..2 {
            if state.done {
                break;
            }
            let action = Action::from_index(rng.gen_range(0..Action::ALL.len())).expect("in range");
            let (_, obs) = probe.step(&mut state, action)?;
            frames.push(obs.frames.mapv(f64::from));
        }
    }
    if frames.is_empty() {
        return Err(HarnessError::Config("normalizer_episodes must be nonzero".into()));
    }
    Ok(Normalizer::fit(&frames))
}
