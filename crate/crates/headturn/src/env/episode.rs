//! Episode engine: spatializes one 500 ms clip window per step through the
//! BRIR for the current (talker, head) pose and scores actions.
//!
//! Step `t` consumes window `t` of the episode's clip. An episode ends when
//! the head faces the talker or after `max_steps` actions; the observation
//! returned at the step cap is all zeros, since there is no window past the
//! clip end and a terminal observation is never bootstrapped from anyway.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureExtractor, Normalizer};
use super::grid::{od2_deg, Action, AngularGrid, GridCell};
use super::reward::{step_reward, RewardConfig};
use super::EnvError;
use crate::audio::convolve::fft_convolve;
use crate::corpus::cache::BrirCache;
use crate::corpus::clips::{ClipSet, WINDOW_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeState {
    pub talker: GridCell,
    pub head: GridCell,
    /// Actions taken so far; also the index of the next clip window.
    pub t: u32,
    pub clip_index: usize,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Observation {
    /// Normalized feature frames, (n_frames, dim).
    pub frames: Array2<f32>,
    /// Talker-minus-head index deviation, clamped to the grid box. Keys the
    /// replay rings; terminal observations never use it.
    pub deviation: (i8, i8),
}

pub struct EpisodeEngine<'a> {
    pub grid: AngularGrid,
    pub reward: RewardConfig,
    cache: &'a BrirCache,
    clips: &'a ClipSet,
    extractor: FeatureExtractor,
    normalizer: Normalizer,
}

impl<'a> EpisodeEngine<'a> {
    pub fn new(
        grid: AngularGrid,
        reward: RewardConfig,
        cache: &'a BrirCache,
        clips: &'a ClipSet,
        extractor: FeatureExtractor,
        normalizer: Normalizer,
    ) -> Self {
        Self { grid, reward, cache, clips, extractor, normalizer }
    }

    pub fn feature_dim(&self) -> usize {
        self.extractor.cfg.dim()
    }

    pub fn n_frames(&self) -> usize {
        self.extractor.cfg.n_frames(WINDOW_SAMPLES)
    }

    fn deviation_key(&self, talker: GridCell, head: GridCell) -> (i8, i8) {
        let d = self.grid.clamp(GridCell::new(
            talker.az_index - head.az_index,
            talker.el_index - head.el_index,
        ));
        (d.az_index, d.el_index)
    }

    /// Spatializes window `t` of the episode clip through the pose's BRIR
    /// and extracts normalized features.
    fn render(&self, state: &EpisodeState) -> Result<Observation, EnvError> {
        let deviation = self.deviation_key(state.talker, state.head);
        let brir = self
            .cache
            .fetch(state.talker, state.head)
            .map_err(|e| EnvError::MissingBrir(e.to_string()))?;
        let window = self.clips.clips[state.clip_index].window(state.t as usize);
        let dry: Vec<f64> = window.iter().map(|&v| v as f64).collect();
        let mut left = fft_convolve(&dry, &brir.left)?;
        let mut right = fft_convolve(&dry, &brir.right)?;
        left.truncate(WINDOW_SAMPLES);
        right.truncate(WINDOW_SAMPLES);
        let frames = self.extractor.extract(&left, &right)?;
        Ok(Observation { frames: self.normalizer.apply(&frames), deviation })
    }

    fn zero_observation(&self, state: &EpisodeState) -> Observation {
        Observation {
            frames: Array2::zeros((self.n_frames(), self.feature_dim())),
            deviation: self.deviation_key(state.talker, state.head),
        }
    }

    /// Starts an episode: talker uniform over the non-center cells, head at
    /// the center, clip uniform over the set.
    pub fn reset(&self, rng: &mut ChaCha8Rng) -> Result<(EpisodeState, Observation), EnvError> {
        if self.clips.clips.is_empty() {
            return Err(EnvError::EmptyClipSet);
        }
        let starts = self.grid.start_cells();
        let talker = starts[rng.gen_range(0..starts.len())];
        let clip_index = rng.gen_range(0..self.clips.clips.len());
        self.reset_at(talker, clip_index)
    }

    /// Starts an episode at a chosen talker cell and clip; stratified
    /// evaluation places exactly this way.
    pub fn reset_at(
        &self,
        talker: GridCell,
        clip_index: usize,
    ) -> Result<(EpisodeState, Observation), EnvError> {
        if clip_index >= self.clips.clips.len() {
            return Err(EnvError::BadClipIndex(clip_index));
        }
        let state =
            EpisodeState { talker, head: GridCell::CENTER, t: 0, clip_index, done: false };
        let obs = self.render(&state)?;
        Ok((state, obs))
    }

    pub fn n_clips(&self) -> usize {
        self.clips.clips.len()
    }

    pub fn clips(&self) -> &ClipSet {
        self.clips
    }

    /// Applies `action`, advancing the state in place. Returns the step
    /// reward and the observation of the new pose.
    pub fn step(
        &self,
        state: &mut EpisodeState,
        action: Action,
    ) -> Result<(f64, Observation), EnvError> {
        if state.done {
            return Err(EnvError::EpisodeDone);
        }
        let before = state.head;
        state.head = self.grid.apply(state.head, action);
        state.t += 1;
        let reward = step_reward(&self.grid, &self.reward, state.talker, before, state.head);
        let reached = od2_deg(state.talker, state.head) == 0;
        state.done = reached || state.t as usize >= self.reward.max_steps;
        let obs = if state.t as usize >= self.reward.max_steps {
            self.zero_observation(state)
        } else {
            self.render(state)?
        };
        Ok((reward, obs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::clips::{Clip, Split, CLIP_SAMPLES};
    use crate::env::features::FeatureConfig;
    use rand::SeedableRng;

    fn noise_clip(seed: u64, talker: &str, clip: &str) -> Clip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Clip {
            talker_id: talker.to_string(),
            clip_id: clip.to_string(),
            samples: (0..CLIP_SAMPLES).map(|_| rng.gen_range(-0.1f32..0.1)).collect(),
        }
    }

    fn test_setup() -> (BrirCache, ClipSet) {
        let cache = BrirCache::anechoic_in_memory(&AngularGrid::desk()).unwrap();
        let clips = ClipSet {
            clips: vec![noise_clip(1, "t0", "c0"), noise_clip(2, "t0", "c1")],
            split: Split::Train,
        };
        (cache, clips)
    }

    fn engine<'a>(cache: &'a BrirCache, clips: &'a ClipSet) -> EpisodeEngine<'a> {
        let cfg = FeatureConfig::default();
        let dim = cfg.dim();
        EpisodeEngine::new(
            AngularGrid::desk(),
            RewardConfig::default(),
            cache,
            clips,
            FeatureExtractor::new(cfg),
            Normalizer::identity(dim),
        )
    }

    #[test]
    fn reset_is_uniform_over_starts_and_clips() {
        let (cache, clips) = test_setup();
        let eng = engine(&cache, &clips);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cell_counts = std::collections::HashMap::new();
        let mut clip_counts = [0usize; 2];
        for _ in 0..2000 {
            let (state, obs) = eng.reset(&mut rng).unwrap();
            assert_eq!(state.head, GridCell::CENTER);
            assert_ne!(state.talker, GridCell::CENTER);
            assert!(!state.done);
            assert_eq!(obs.frames.dim(), (48, 128));
            *cell_counts.entry(state.talker).or_insert(0usize) += 1;
            clip_counts[state.clip_index] += 1;
        }
        // 20 start cells on the 7x3 grid, expectation 100 draws each.
        assert_eq!(cell_counts.len(), 20);
        for (&cell, &n) in &cell_counts {
            assert!(n > 40 && n < 200, "cell {cell:?} drawn {n} times");
        }
        assert!(clip_counts[0] > 800 && clip_counts[1] > 800);
    }

    #[test]
    fn one_step_to_the_talker_terminates_with_target_reward() {
        let (cache, clips) = test_setup();
        let eng = engine(&cache, &clips);
        let mut state =
            EpisodeState { talker: GridCell::new(1, 0), head: GridCell::CENTER, t: 0, clip_index: 0, done: false };
        let (r, obs) = eng.step(&mut state, Action::E).unwrap();
        assert_eq!(r, 1.0);
        assert!(state.done);
        assert_eq!(state.t, 1);
        assert_eq!(state.head, GridCell::new(1, 0));
        // Terminal before the step cap still observes a real window.
        assert!(obs.frames.iter().any(|&v| v != 0.0));
        assert_eq!(obs.deviation, (0, 0));
        assert!(matches!(eng.step(&mut state, Action::E), Err(EnvError::EpisodeDone)));
    }

    #[test]
    fn step_cap_truncates_with_zero_observation() {
        let (cache, clips) = test_setup();
        let eng = engine(&cache, &clips);
        let mut state =
            EpisodeState { talker: GridCell::new(3, 1), head: GridCell::CENTER, t: 0, clip_index: 0, done: false };
        let mut last = None;
        for _ in 0..20 {
            assert!(!state.done);
            last = Some(eng.step(&mut state, Action::W).unwrap());
        }
        assert!(state.done);
        assert_eq!(state.t, 20);
        assert_eq!(state.head, GridCell::new(-3, 0));
        let (r, obs) = last.unwrap();
        assert_eq!(r, 0.0);
        assert!(obs.frames.iter().all(|&v| v == 0.0));
        assert!(matches!(eng.step(&mut state, Action::W), Err(EnvError::EpisodeDone)));
    }

    #[test]
    fn deviation_key_is_clamped_to_the_grid() {
        let (cache, clips) = test_setup();
        let eng = engine(&cache, &clips);
        assert_eq!(eng.deviation_key(GridCell::new(3, 1), GridCell::new(-3, -1)), (3, 1));
        assert_eq!(eng.deviation_key(GridCell::new(-2, 0), GridCell::new(1, 1)), (-3, -1));
    }

    #[test]
    fn episodes_are_deterministic_in_the_seed() {
        let (cache, clips) = test_setup();
        let eng = engine(&cache, &clips);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let (mut state, obs0) = eng.reset(&mut rng).unwrap();
            let (r, obs1) = eng.step(&mut state, Action::NE).unwrap();
            (state, obs0.frames, r, obs1.frames)
        };
        let (s_a, o0_a, r_a, o1_a) = run();
        let (s_b, o0_b, r_b, o1_b) = run();
        assert_eq!(s_a, s_b);
        assert_eq!(o0_a, o0_b);
        assert_eq!(r_a, r_b);
        assert_eq!(o1_a, o1_b);
    }
}
