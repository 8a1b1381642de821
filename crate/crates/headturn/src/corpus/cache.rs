//! On-disk BRIR cache, one directory per environment.
//!
//! Reverberant rooms store one stereo WAV per (talker cell, head cell) pair.
//! The anechoic room depends only on the per-axis deviation angles, so it
//! stores one WAV per grid cell and `load` additionally renders the full
//! closure of deviation-degree pairs in memory (head-relative deviations can
//! leave the grid box even though both cells are inside it).
//!
//! `index.json` carries a hash of everything the entries depend on and is
//! written only after every entry is on disk, so an interrupted build is
//! resumed by rerunning it. Entry writes go through a temp file and rename.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::clips::SAMPLE_RATE;
use super::CorpusError;
use crate::audio::brir::{render_brir, Brir};
use crate::audio::hrir::HrirProvider;
use crate::audio::room::{default_max_order, HeadPose, RoomSpec};
use crate::audio::wav::{read_wav, write_wav_f32};
use crate::env::grid::{AngularGrid, GridCell};

/// Acoustic environments used in training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Anechoic,
    Low,
    Med,
    High,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [EnvId::Anechoic, EnvId::Low, EnvId::Med, EnvId::High];

    pub fn id(&self) -> &'static str {
        match self {
            EnvId::Anechoic => "anechoic",
            EnvId::Low => "low",
            EnvId::Med => "med",
            EnvId::High => "high",
        }
    }

    /// Room preset for this environment at the corpus sample rate.
    pub fn room(&self) -> RoomSpec {
        let (dims, t60) = match self {
            EnvId::Anechoic => ([4.0, 6.0, 4.0], 0.0),
            EnvId::Low => ([4.0, 6.0, 4.0], 0.2),
            EnvId::Med => ([5.0, 7.0, 4.0], 0.4),
            EnvId::High => ([6.0, 8.0, 4.0], 0.6),
        };
        RoomSpec::new(dims, t60, SAMPLE_RATE).expect("preset rooms are valid")
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EnvId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, CorpusError> {
        match s {
            "anechoic" => Ok(EnvId::Anechoic),
            "low" => Ok(EnvId::Low),
            "med" => Ok(EnvId::Med),
            "high" => Ok(EnvId::High),
            other => Err(CorpusError::UnknownEnv(other.to_string())),
        }
    }
}

/// Everything the rendered entries depend on. Hashed into `index.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct CacheConfig {
    env_id: String,
    dims: [f64; 3],
    t60: f64,
    speed_of_sound: f64,
    sample_rate: f64,
    az_half: i8,
    el_half: i8,
    hrir: String,
    hrir_len: usize,
    max_order: u32,
}

impl CacheConfig {
    fn new(env: EnvId, grid: &AngularGrid, provider: &HrirProvider, max_order: u32) -> Self {
        let room = env.room();
        CacheConfig {
            env_id: env.id().to_string(),
            dims: room.dims,
            t60: room.t60,
            speed_of_sound: room.speed_of_sound,
            sample_rate: room.sample_rate,
            az_half: grid.az_half,
            el_half: grid.el_half,
            hrir: match provider {
                HrirProvider::Parametric { .. } => "parametric-v1".to_string(),
                HrirProvider::Pack(_) => "pack".to_string(),
            },
            hrir_len: provider.ir_len(),
            max_order,
        }
    }

    fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        format!("{digest:x}")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheIndex {
    config_hash: String,
    config: CacheConfig,
    n_entries: usize,
}

fn pair_path(dir: &Path, talker: GridCell, head: GridCell) -> PathBuf {
    dir.join(format!(
        "t{}_{}__h{}_{}.wav",
        talker.az_index, talker.el_index, head.az_index, head.el_index
    ))
}

fn dev_path(dir: &Path, cell: GridCell) -> PathBuf {
    dir.join(format!("d{}_{}.wav", cell.az_index, cell.el_index))
}

fn write_entry(path: &Path, brir: &Brir) -> Result<(), CorpusError> {
    let tmp = path.with_extension("wav.tmp");
    write_wav_f32(&tmp, &[&brir.left, &brir.right], brir.sample_rate as u32)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_entry(path: &Path) -> Result<Brir, CorpusError> {
    let (mut channels, fs) = read_wav(path)?;
    if channels.len() != 2 {
        return Err(CorpusError::CacheMismatch { dir: path.display().to_string() });
    }
    let right = channels.pop().unwrap();
    let left = channels.pop().unwrap();
    Ok(Brir { left, right, sample_rate: fs as f64 })
}

fn resolve_max_order(env: EnvId, max_order: Option<u32>) -> u32 {
    if env == EnvId::Anechoic {
        0
    } else {
        max_order.unwrap_or_else(|| default_max_order(&env.room()))
    }
}

/// Renders every entry for `env` into `dir`, skipping entries that already
/// exist, and writes `index.json` once all are present. Rebuilding a complete
/// cache is a no-op; a cache built under a different configuration is
/// rejected rather than silently mixed. `progress` is called after each
/// entry with (done, total). Returns the total entry count.
pub fn build_brir_cache(
    dir: &Path,
    env: EnvId,
    grid: &AngularGrid,
    max_order: Option<u32>,
    mut progress: impl FnMut(usize, usize),
) -> Result<usize, CorpusError> {
    std::fs::create_dir_all(dir)?;
    let provider = HrirProvider::parametric(SAMPLE_RATE);
    let order = resolve_max_order(env, max_order);
    let config = CacheConfig::new(env, grid, &provider, order);
    let hash = config.hash();

    let index_path = dir.join("index.json");
    if index_path.exists() {
        let index = load_index(&index_path, dir)?;
        if index.config_hash != hash {
            return Err(CorpusError::StaleCache {
                dir: dir.display().to_string(),
                expected: hash,
                found: index.config_hash,
            });
        }
        return Ok(index.n_entries);
    }

    let room = env.room();
    let total = if env == EnvId::Anechoic { grid.n_cells() } else { grid.n_cells() * grid.n_cells() };
    let mut done = 0;
    if env == EnvId::Anechoic {
        for cell in grid.cells() {
            let path = dev_path(dir, cell);
            if !path.exists() {
                let brir = render_brir(
                    &room,
                    cell.az_deg() as f64,
                    cell.el_deg() as f64,
                    HeadPose { yaw_deg: 0.0, pitch_deg: 0.0 },
                    &provider,
                    Some(0),
                )?;
                write_entry(&path, &brir)?;
            }
            done += 1;
            progress(done, total);
        }
    } else {
        for talker in grid.cells() {
            for head in grid.cells() {
                let path = pair_path(dir, talker, head);
                if !path.exists() {
                    let brir = render_brir(
                        &room,
                        talker.az_deg() as f64,
                        talker.el_deg() as f64,
                        HeadPose { yaw_deg: head.az_deg() as f64, pitch_deg: head.el_deg() as f64 },
                        &provider,
                        Some(order),
                    )?;
                    write_entry(&path, &brir)?;
                }
                done += 1;
                progress(done, total);
            }
        }
    }

    let index = CacheIndex { config_hash: hash, config, n_entries: total };
    let tmp = index_path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(&index).expect("index serializes"))?;
    std::fs::rename(&tmp, &index_path)?;
    Ok(total)
}

/// Every deviation-degree pair reachable from in-grid (talker, head) pairs,
/// rendered fresh.
fn anechoic_closure(
    grid: &AngularGrid,
    provider: &HrirProvider,
) -> Result<HashMap<(i32, i32), Brir>, CorpusError> {
    let room = EnvId::Anechoic.room();
    let mut by_deviation = HashMap::new();
    for talker in grid.cells() {
        for head in grid.cells() {
            let key = (talker.az_deg() - head.az_deg(), talker.el_deg() - head.el_deg());
            if let std::collections::hash_map::Entry::Vacant(e) = by_deviation.entry(key) {
                e.insert(render_brir(
                    &room,
                    key.0 as f64,
                    key.1 as f64,
                    HeadPose { yaw_deg: 0.0, pitch_deg: 0.0 },
                    provider,
                    Some(0),
                )?);
            }
        }
    }
    Ok(by_deviation)
}

fn load_index(path: &Path, dir: &Path) -> Result<CacheIndex, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|_| CorpusError::CacheMismatch { dir: dir.display().to_string() })
}

/// All BRIRs of one environment, resident in memory.
///
/// Reverberant rooms are keyed by the (talker, head) cell pair. The anechoic
/// room is keyed by the deviation in whole degrees, so every pair with the
/// same per-axis deviation shares one entry.
#[derive(Debug)]
pub struct BrirCache {
    env: EnvId,
    pairs: HashMap<(GridCell, GridCell), Brir>,
    by_deviation: HashMap<(i32, i32), Brir>,
}

impl BrirCache {
    pub fn env(&self) -> EnvId {
        self.env
    }

    /// Loads a cache previously written by [`build_brir_cache`]; the
    /// configuration must match or the cache is rejected as stale.
    pub fn load(
        dir: &Path,
        env: EnvId,
        grid: &AngularGrid,
        max_order: Option<u32>,
    ) -> Result<Self, CorpusError> {
        let provider = HrirProvider::parametric(SAMPLE_RATE);
        let order = resolve_max_order(env, max_order);
        let config = CacheConfig::new(env, grid, &provider, order);
        let hash = config.hash();
        let index = load_index(&dir.join("index.json"), dir)?;
        if index.config_hash != hash {
            return Err(CorpusError::StaleCache {
                dir: dir.display().to_string(),
                expected: hash,
                found: index.config_hash,
            });
        }

        let mut pairs = HashMap::new();
        let mut by_deviation = HashMap::new();
        if env == EnvId::Anechoic {
            // Entries on disk are only spot-checked against fresh renders in
            // tests; lookups always use the in-memory closure so that every
            // deviation reachable from in-grid pairs is present.
            by_deviation = anechoic_closure(grid, &provider)?;
        } else {
            for talker in grid.cells() {
                for head in grid.cells() {
                    let brir = read_entry(&pair_path(dir, talker, head))?;
                    pairs.insert((talker, head), brir);
                }
            }
        }
        Ok(BrirCache { env, pairs, by_deviation })
    }

    /// Builds the anechoic closure directly, no disk involved.
    pub fn anechoic_in_memory(grid: &AngularGrid) -> Result<Self, CorpusError> {
        let provider = HrirProvider::parametric(SAMPLE_RATE);
        let by_deviation = anechoic_closure(grid, &provider)?;
        Ok(BrirCache { env: EnvId::Anechoic, pairs: HashMap::new(), by_deviation })
    }

    pub fn fetch(&self, talker: GridCell, head: GridCell) -> Result<&Brir, CorpusError> {
        let missing = || CorpusError::MissingEntry {
            env_id: self.env.id().to_string(),
            t_az: talker.az_deg(),
            t_el: talker.el_deg(),
            h_az: head.az_deg(),
            h_el: head.el_deg(),
        };
        if self.env == EnvId::Anechoic {
            let key = (talker.az_deg() - head.az_deg(), talker.el_deg() - head.el_deg());
            self.by_deviation.get(&key).ok_or_else(missing)
        } else {
            self.pairs.get(&(talker, head)).ok_or_else(missing)
        }
    }
}

/// Caches for several environments at once.
#[derive(Debug, Default)]
pub struct BrirStore {
    caches: HashMap<EnvId, BrirCache>,
}

impl BrirStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cache: BrirCache) {
        self.caches.insert(cache.env(), cache);
    }

    pub fn get(&self, env: EnvId) -> Option<&BrirCache> {
        self.caches.get(&env)
    }

    pub fn fetch_brir(&self, env: EnvId, talker: GridCell, head: GridCell) -> Result<&Brir, CorpusError> {
        let cache = self.caches.get(&env).ok_or_else(|| CorpusError::MissingEntry {
            env_id: env.id().to_string(),
            t_az: talker.az_deg(),
            t_el: talker.el_deg(),
            h_az: head.az_deg(),
            h_el: head.el_deg(),
        })?;
        cache.fetch(talker, head)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_ids_roundtrip() {
        for env in EnvId::ALL {
            assert_eq!(env.id().parse::<EnvId>().unwrap(), env);
        }
        assert!(matches!("medium".parse::<EnvId>(), Err(CorpusError::UnknownEnv(_))));
    }

    #[test]
    fn room_presets() {
        assert!(EnvId::Anechoic.room().is_anechoic());
        assert_eq!(EnvId::Low.room().t60, 0.2);
        assert_eq!(EnvId::Med.room().t60, 0.4);
        assert_eq!(EnvId::High.room().t60, 0.6);
        assert_eq!(EnvId::High.room().dims, [6.0, 8.0, 4.0]);
        for env in EnvId::ALL {
            assert_eq!(env.room().sample_rate, SAMPLE_RATE);
        }
    }

    #[test]
    fn anechoic_cache_full_grid() {
        let dir = tempfile::tempdir().unwrap();
        let grid = AngularGrid::full();
        let n = build_brir_cache(dir.path(), EnvId::Anechoic, &grid, None, |_, _| {}).unwrap();
        assert_eq!(n, 65);
        let wavs = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "wav"))
            .count();
        assert_eq!(wavs, 65);

        let cache = BrirCache::load(dir.path(), EnvId::Anechoic, &grid, None).unwrap();
        // Distinct deviations: 25 azimuth differences x 13 elevation differences.
        assert_eq!(cache.by_deviation.len(), 325);

        // Same deviation, different absolute pose: identical impulse response.
        let a = cache.fetch(GridCell::new(2, 0), GridCell::new(1, 0)).unwrap();
        let b = cache.fetch(GridCell::new(1, 0), GridCell::new(0, 0)).unwrap();
        assert_eq!(a.left, b.left);
        assert_eq!(a.right, b.right);

        // Extreme deviation (180, 90) is reachable and present.
        cache.fetch(GridCell::new(6, 2), GridCell::new(-6, -2)).unwrap();

        // Disk entries match fresh renders after f32 quantization.
        let disk = read_entry(&dev_path(dir.path(), GridCell::new(1, 0))).unwrap();
        let mem = cache.fetch(GridCell::new(1, 0), GridCell::CENTER).unwrap();
        for (d, m) in disk.left.iter().zip(&mem.left) {
            assert_eq!(*d, *m as f32 as f64);
        }
    }

    #[test]
    fn reverb_cache_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let grid = AngularGrid::desk();
        // Order 1 keeps the test quick while still exercising reflections;
        // order 0 would leave only the direct path, which depends on the
        // deviation alone and cannot distinguish absolute poses.
        let n = build_brir_cache(dir.path(), EnvId::Low, &grid, Some(1), |_, _| {}).unwrap();
        assert_eq!(n, 441);

        let cache = BrirCache::load(dir.path(), EnvId::Low, &grid, Some(1)).unwrap();
        assert_eq!(cache.pairs.len(), 441);
        let a = cache.fetch(GridCell::new(2, 0), GridCell::new(1, 0)).unwrap();
        let b = cache.fetch(GridCell::new(1, 0), GridCell::new(0, 0)).unwrap();
        // Reverberant responses depend on absolute geometry, not deviation.
        assert_ne!(a.left, b.left);

        let err = cache.fetch(GridCell::new(6, 0), GridCell::CENTER).unwrap_err();
        assert!(matches!(err, CorpusError::MissingEntry { .. }));
    }

    #[test]
    fn resume_is_idempotent_and_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let grid = AngularGrid::desk();
        build_brir_cache(dir.path(), EnvId::Anechoic, &grid, None, |_, _| {}).unwrap();

        let victim = dev_path(dir.path(), GridCell::new(1, 1));
        let original = std::fs::read(&victim).unwrap();
        std::fs::remove_file(&victim).unwrap();
        std::fs::remove_file(dir.path().join("index.json")).unwrap();

        build_brir_cache(dir.path(), EnvId::Anechoic, &grid, None, |_, _| {}).unwrap();
        assert_eq!(std::fs::read(&victim).unwrap(), original);

        // Complete cache: rebuilding touches nothing.
        let mtime = std::fs::metadata(&victim).unwrap().modified().unwrap();
        build_brir_cache(dir.path(), EnvId::Anechoic, &grid, None, |_, _| {}).unwrap();
        assert_eq!(std::fs::metadata(&victim).unwrap().modified().unwrap(), mtime);
    }

    #[test]
    fn stale_and_garbled_indexes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let grid = AngularGrid::desk();
        build_brir_cache(dir.path(), EnvId::Anechoic, &grid, None, |_, _| {}).unwrap();

        // Same directory, different grid: stale.
        let err = BrirCache::load(dir.path(), EnvId::Anechoic, &AngularGrid::full(), None).unwrap_err();
        assert!(matches!(err, CorpusError::StaleCache { .. }));
        let err =
            build_brir_cache(dir.path(), EnvId::Anechoic, &AngularGrid::full(), None, |_, _| {}).unwrap_err();
        assert!(matches!(err, CorpusError::StaleCache { .. }));

        std::fs::write(dir.path().join("index.json"), b"not json").unwrap();
        let err = BrirCache::load(dir.path(), EnvId::Anechoic, &grid, None).unwrap_err();
        assert!(matches!(err, CorpusError::CacheMismatch { .. }));
    }

    #[test]
    fn store_routes_by_environment() {
        let grid = AngularGrid::desk();
        let mut store = BrirStore::new();
        store.insert(BrirCache::anechoic_in_memory(&grid).unwrap());
        store.fetch_brir(EnvId::Anechoic, GridCell::new(1, 0), GridCell::CENTER).unwrap();
        let err = store.fetch_brir(EnvId::Low, GridCell::new(1, 0), GridCell::CENTER).unwrap_err();
        assert!(matches!(err, CorpusError::MissingEntry { .. }));
    }
}
