//! Run configuration: every knob that affects training or evaluation, in one
//! serializable struct. Reports embed it verbatim and checkpoints carry its
//! hash, so a result can always be traced back to the exact settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::corpus::cache::EnvId;
use crate::corpus::clips::SplitSpec;
use crate::env::features::FeatureConfig;
use crate::env::grid::AngularGrid;
use crate::env::reward::RewardConfig;
use crate::learner::params::{NetLayout, N_ACTIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
}

impl NetConfig {
    pub fn layout(&self, feature_dim: usize) -> Result<NetLayout, HarnessError> {
        Ok(NetLayout::new(feature_dim, self.hidden.clone(), self.dropout.clone(), N_ACTIONS)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: u64,
    pub batch_size: usize,
    /// Actions per optimize step; 1 optimizes after every action.
    pub optimize_every: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub grad_clip: Option<f64>,
    pub gamma: f64,
    pub huber_delta: f64,
    pub squared_huber: bool,
    pub tau: f64,
    pub eps_start: f64,
    pub eps_decay_episodes: u64,
    pub replay_ring_capacity: usize,
    pub checkpoint_every: u64,
    /// Episodes rolled out with random actions to fit the feature normalizer.
    pub normalizer_episodes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub episodes_per_start: u32,
    pub seed: u64,
}

/// Where a run reads and writes. Moving artifacts around must not change
/// what experiment they belong to, so this section stays outside the
/// semantic hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    /// Corpus manifest (talker id -> clip files).
    pub manifest: Option<PathBuf>,
    /// Directory holding one BRIR cache subdirectory per environment id.
    pub cache_root: Option<PathBuf>,
    /// Run directory for checkpoints, logs, and reports.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvId,
    pub grid: AngularGrid,
    pub reward: RewardConfig,
    pub features: FeatureConfig,
    pub split: SplitSpec,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub eval: EvalSpec,
    #[serde(default)]
    pub paths: DataPaths,
}

impl RunConfig {
    /// The paper's setup: full grid, four-layer recurrent stack, 76,800
    /// episodes at batch 1024. Not desk-feasible; kept for reference and for
    /// scaled-down derivation.
    pub fn full_scale(env: EnvId, seed: u64) -> Self {
        Self {
            seed,
            env,
            grid: AngularGrid::full(),
            reward: RewardConfig::default(),
            features: FeatureConfig::default(),
            split: SplitSpec::full_scale(),
            net: NetConfig { hidden: vec![512, 256, 128, 64], dropout: vec![0.2, 0.2, 0.2, 0.5] },
            train: TrainConfig {
                episodes: 76_800,
                batch_size: 1024,
                optimize_every: 1,
                learning_rate: 1e-3,
                weight_decay: 0.01,
                grad_clip: Some(10.0),
                gamma: 0.8,
                huber_delta: 1.0,
                squared_huber: false,
                tau: 5e-5,
                eps_start: 0.2,
                eps_decay_episodes: 30_000,
                replay_ring_capacity: 5_000,
                checkpoint_every: 5_000,
                normalizer_episodes: 128,
            },
            eval: EvalSpec { episodes_per_start: 3, seed: 1013 },
            paths: DataPaths::default(),
        }
    }

    /// Reduced profile that trains on one CPU core in well under two hours:
    /// 7x3 grid, two-layer stack, 4,000 episodes at batch 256. The faster
    /// target blend and shorter exploration tail rescale the full schedule
    /// to the shorter run.
    pub fn desk(env: EnvId, seed: u64) -> Self {
        Self {
            seed,
            env,
            grid: AngularGrid::desk(),
            reward: RewardConfig::default(),
            features: FeatureConfig::default(),
            split: SplitSpec::desk(),
            net: NetConfig { hidden: vec![64, 32], dropout: vec![0.2, 0.5] },
            train: TrainConfig {
                episodes: 4_000,
                batch_size: 256,
                // One update per 4 actions keeps a 4,000-episode run inside
                // a 2 h single-core budget at this batch size.
                optimize_every: 4,
                learning_rate: 1e-3,
                weight_decay: 0.01,
                grad_clip: Some(10.0),
                gamma: 0.8,
                huber_delta: 1.0,
                squared_huber: false,
                tau: 5e-3,
                eps_start: 0.2,
                eps_decay_episodes: 3_000,
                replay_ring_capacity: 5_000,
                checkpoint_every: 500,
                normalizer_episodes: 48,
            },
            eval: EvalSpec { episodes_per_start: 3, seed: 1013 },
            paths: DataPaths::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let t = &self.train;
        if t.episodes == 0 || t.batch_size == 0 || t.optimize_every == 0 {
            return Err(HarnessError::Config("episodes, batch and cadence must be nonzero".into()));
        }
        if !t.learning_rate.is_finite() || t.learning_rate <= 0.0 || !(0.0..=1.0).contains(&t.gamma)
        {
            return Err(HarnessError::Config("learning rate or gamma out of range".into()));
        }
        if !(0.0..=1.0).contains(&t.tau) || !(0.0..=1.0).contains(&t.eps_start) {
            return Err(HarnessError::Config("tau and epsilon must lie in [0, 1]".into()));
        }
        if t.replay_ring_capacity == 0 || t.checkpoint_every == 0 {
            return Err(HarnessError::Config("capacity and checkpoint cadence must be nonzero".into()));
        }
        if self.eval.episodes_per_start == 0 {
            return Err(HarnessError::Config("evaluation needs at least one episode per start".into()));
        }
        self.net.layout(self.features.dim()).map(|_| ())
    }

    /// SHA-256 over the canonical JSON form with paths blanked; binds
    /// checkpoints and reports to the settings that produced them.
    pub fn hash(&self) -> [u8; 32] {
        let mut semantic = self.clone();
        semantic.paths = DataPaths::default();
        let json = serde_json::to_string(&semantic).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Write-then-rename so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_profile_is_valid_and_reduced() {
        let cfg = RunConfig::desk(EnvId::Anechoic, 7);
        cfg.validate().unwrap();
        assert_eq!(cfg.grid, AngularGrid::desk());
        assert_eq!(cfg.net.hidden, vec![64, 32]);
        assert_eq!(cfg.train.batch_size, 256);
        assert!((4_000..=8_000).contains(&cfg.train.episodes));
    }

    #[test]
    fn full_scale_matches_published_schedule() {
        let cfg = RunConfig::full_scale(EnvId::Med, 7);
        cfg.validate().unwrap();
        assert_eq!(cfg.train.episodes, 76_800);
        assert_eq!(cfg.train.batch_size, 1024);
        assert_eq!(cfg.train.tau, 5e-5);
        assert_eq!(cfg.train.eps_decay_episodes, 30_000);
        assert_eq!(cfg.net.hidden, vec![512, 256, 128, 64]);
    }

    #[test]
    fn hash_tracks_semantic_changes_only() {
        let a = RunConfig::desk(EnvId::Anechoic, 7);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.paths.out_dir = Some(PathBuf::from("/somewhere/else"));
        assert_eq!(a.hash(), b.hash());
        b.train.gamma = 0.9;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn roundtrips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run_config.json");
        let cfg = RunConfig::desk(EnvId::Low, 3);
        cfg.save(&path).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn bad_configs_are_rejected_with_config_errors() {
        let mut cfg = RunConfig::desk(EnvId::Anechoic, 7);
        cfg.train.optimize_every = 0;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let mut cfg = RunConfig::desk(EnvId::Anechoic, 7);
        cfg.net.dropout = vec![0.2];
        assert!(cfg.validate().is_err());
    }
}
