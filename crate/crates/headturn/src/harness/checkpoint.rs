//! Versioned binary checkpoints. Everything a run needs to resume or be
//! evaluated lives here except the replay buffer, which is rebuilt from
//! fresh interaction after a resume.

use std::path::Path;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{hex, write_atomic, RunConfig};
use super::HarnessError;
use crate::env::features::Normalizer;
use crate::learner::adam::Adam;
use crate::learner::params::NetLayout;

const MAGIC: [u8; 4] = *b"HTQN";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    /// Episodes completed when this state was captured.
    pub episode: u64,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    pub layout: NetLayout,
    pub params: Array1<f32>,
    pub target: Array1<f32>,
    pub adam: Adam<f32>,
    pub normalizer: Normalizer,
    /// Talkers the agent trained on; evaluation refuses clip sets that
    /// overlap this list.
    pub train_talkers: Vec<String>,
}

impl Checkpoint {
    pub fn matches_config(&self, cfg: &RunConfig) -> bool {
        self.config_hash == cfg.hash()
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.rng_seed);
        rng.set_stream(self.rng_stream);
        rng.set_word_pos(self.rng_word_pos);
        rng
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let bytes = std::fs::read(path)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            HarnessError::Data(m) => HarnessError::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(&MAGIC);
        put_u32(&mut w, VERSION);
        w.extend_from_slice(&self.config_hash);
        put_u64(&mut w, self.episode);
        w.extend_from_slice(&self.rng_seed);
        put_u64(&mut w, self.rng_stream);
        w.extend_from_slice(&self.rng_word_pos.to_le_bytes());

        put_u32(&mut w, self.layout.feature_dim as u32);
        put_u32(&mut w, self.layout.n_actions as u32);
        put_u32(&mut w, self.layout.n_layers() as u32);
        for &h in &self.layout.hidden {
            put_u32(&mut w, h as u32);
        }
        for &d in &self.layout.dropout {
            w.extend_from_slice(&d.to_le_bytes());
        }

        put_u64(&mut w, self.params.len() as u64);
        for arr in [&self.params, &self.target, &self.adam.m, &self.adam.v] {
            for &v in arr.iter() {
                w.extend_from_slice(&v.to_le_bytes());
            }
        }
        put_u64(&mut w, self.adam.t);
        put_u64(&mut w, self.adam.skipped);

        put_u32(&mut w, self.normalizer.mean.len() as u32);
        for &v in &self.normalizer.mean {
            w.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &self.normalizer.std {
            w.extend_from_slice(&v.to_le_bytes());
        }

        put_u32(&mut w, self.train_talkers.len() as u32);
        for t in &self.train_talkers {
            put_u32(&mut w, t.len() as u32);
            w.extend_from_slice(t.as_bytes());
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HarnessError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err(HarnessError::Data("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(HarnessError::Data(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(r.take(32)?);
        let episode = r.u64()?;
        let mut rng_seed = [0u8; 32];
        rng_seed.copy_from_slice(r.take(32)?);
        let rng_stream = r.u64()?;
        let rng_word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));

        let feature_dim = r.u32()? as usize;
        let n_actions = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        let mut hidden = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            hidden.push(r.u32()? as usize);
        }
        let mut dropout = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            dropout.push(r.f64()?);
        }
        let layout = NetLayout::new(feature_dim, hidden, dropout, n_actions)
            .map_err(|e| HarnessError::Data(format!("checkpoint layout: {e}")))?;

        let n_params = r.u64()? as usize;
        if n_params != layout.n_params() {
            return Err(HarnessError::Data(format!(
                "checkpoint holds {n_params} parameters, layout needs {}",
                layout.n_params()
            )));
        }
        let params = r.f32_array(n_params)?;
        let target = r.f32_array(n_params)?;
        let m = r.f32_array(n_params)?;
        let v = r.f32_array(n_params)?;
        let adam = Adam { m, v, t: r.u64()?, skipped: r.u64()? };

        let norm_dim = r.u32()? as usize;
        if norm_dim != feature_dim {
            return Err(HarnessError::Data(format!(
                "normalizer dimension {norm_dim} != feature dimension {feature_dim}"
            )));
        }
        let mean = r.f32_vec(norm_dim)?;
        let std = r.f32_vec(norm_dim)?;

        let n_talkers = r.u32()? as usize;
        let mut train_talkers = Vec::with_capacity(n_talkers);
        for _ in 0..n_talkers {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|_| HarnessError::Data("talker id is not utf-8".into()))?;
            train_talkers.push(s.to_string());
        }
        if r.at != bytes.len() {
            return Err(HarnessError::Data(format!(
                "{} trailing bytes after checkpoint payload",
                bytes.len() - r.at
            )));
        }
        Ok(Self {
            config_hash,
            episode,
            rng_seed,
            rng_stream,
            rng_word_pos,
            layout,
            params,
            target,
            adam,
            normalizer: Normalizer { mean, std },
            train_talkers,
        })
    }
}

/// Both-hash warning text for mismatched config; callers that merely read
/// (evaluate, report) warn and proceed, while train refuses to resume.
pub fn hash_mismatch_message(ckpt: &Checkpoint, cfg: &RunConfig) -> String {
    format!(
        "checkpoint hash {} does not match run config hash {}",
        hex(&ckpt.config_hash),
        cfg.hash_hex()
    )
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HarnessError> {
        if self.at + n > self.bytes.len() {
            return Err(HarnessError::Data("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, HarnessError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, HarnessError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, HarnessError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>, HarnessError> {
        let raw = self.take(n * 4)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn f32_array(&mut self, n: usize) -> Result<Array1<f32>, HarnessError> {
        Ok(Array1::from_vec(self.f32_vec(n)?))
    }
}
