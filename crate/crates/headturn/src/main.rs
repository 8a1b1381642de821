//! Command line front end: config scaffolding, corpus preparation, BRIR
//! cache building, training, evaluation, baselines, the generalization
//! matrix, and report emission. Exit codes: 0 success, 1 config error,
//! 2 data error, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use headturn::corpus::cache::{build_brir_cache, BrirCache, EnvId};
use headturn::corpus::clips::{split_corpus, ClipSet, Manifest};
use headturn::corpus::synth::generate_corpus;
use headturn::harness::checkpoint::Checkpoint;
use headturn::harness::config::RunConfig;
use headturn::harness::eval::{evaluate, generalization_matrix, random_baseline, Metrics};
use headturn::harness::report::{emit_report, ResultSet, RESULTS_FILE};
use headturn::harness::trainer::{read_log, train, CHECKPOINT_FILE, CONFIG_FILE, LOG_FILE};
use headturn::harness::HarnessError;

#[derive(Parser)]
#[command(name = "headturn", version, about = "Binaural head-orientation agent")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's acoustic environment.
    #[arg(long)]
    env: Option<String>,
    /// Override the run directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a starter run configuration, with data paths beside it.
    InitConfig {
        /// Training profile: desk (single-machine scale) or full.
        #[arg(long, default_value = "desk")]
        profile: String,
        /// Acoustic environment the policy trains in.
        #[arg(long, default_value = "anechoic")]
        env: String,
        /// Seed baked into the config.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize the talker corpus the config's split needs.
    PrepareData {
        #[command(flatten)]
        common: Common,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render the BRIR cache for the selected environment.
    BuildBrirs {
        #[command(flatten)]
        common: Common,
        /// Cap the image-source reflection order.
        #[arg(long)]
        max_order: Option<u32>,
    },
    /// Train a policy; an interrupted run resumes from its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on the held-out talkers.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; defaults to <run dir>/checkpoint.htqn.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Override the evaluation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audio-free uniform-random baseline on the config's grid.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Override the evaluation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo episode count.
        #[arg(long, default_value_t = 100_000)]
        episodes: u32,
    },
    /// Evaluate checkpoints across environments (rows ENV=CHECKPOINT).
    Generalize {
        #[command(flatten)]
        common: Common,
        /// Trained checkpoint per environment, as ENV=PATH; repeatable.
        #[arg(long = "checkpoint", value_name = "ENV=PATH", required = true)]
        checkpoints: Vec<String>,
        /// Environment to test on; repeatable, defaults to the trained ones.
        #[arg(long = "test-env", value_name = "ENV")]
        test_envs: Vec<String>,
    },
    /// Write metrics.json, table.csv and training_curve.csv for a run dir.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_env(s: &str) -> Result<EnvId, HarnessError> {
    EnvId::ALL
        .into_iter()
        .find(|e| e.id() == s)
        .ok_or_else(|| {
            let known: Vec<&str> = EnvId::ALL.iter().map(|e| e.id()).collect();
            HarnessError::Config(format!("unknown environment {s:?}; one of {}", known.join(", ")))
        })
}

/// Loads the config and applies the shared --env/--out overrides.
fn load_config(common: &Common) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(env) = &common.env {
        cfg.env = parse_env(env)?;
    }
    if let Some(out) = &common.out {
        cfg.paths.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn manifest_path(cfg: &RunConfig) -> Result<&Path, HarnessError> {
    cfg.paths
        .manifest
        .as_deref()
        .ok_or_else(|| HarnessError::Config("config sets no corpus manifest path".into()))
}

fn cache_root(cfg: &RunConfig) -> Result<&Path, HarnessError> {
    cfg.paths
        .cache_root
        .as_deref()
        .ok_or_else(|| HarnessError::Config("config sets no BRIR cache root".into()))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, HarnessError> {
    cfg.paths
        .out_dir
        .as_deref()
        .ok_or_else(|| HarnessError::Config("no run directory; set paths.out_dir or pass --out".into()))
}

fn load_cache(cfg: &RunConfig, env: EnvId) -> Result<BrirCache, HarnessError> {
    let dir = cache_root(cfg)?.join(env.id());
    Ok(BrirCache::load(&dir, env, &cfg.grid, None)?)
}

fn load_splits(cfg: &RunConfig) -> Result<(ClipSet, ClipSet), HarnessError> {
    let manifest = Manifest::load(manifest_path(cfg)?)?;
    Ok(split_corpus(&manifest, cfg.seed, &cfg.split)?)
}

/// Merges one labeled result into <run dir>/results.json, creating it on
/// first use; `report` later renders the accumulated set.
fn record_result(cfg: &RunConfig, label: &str, metrics: Metrics) -> Result<(), HarnessError> {
    let Some(dir) = cfg.paths.out_dir.as_deref() else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    let path = dir.join(RESULTS_FILE);
    let mut results = ResultSet::load_or_empty(&path)?;
    results.insert(label, metrics);
    results.save(&path)
}

fn print_metrics(label: &str, m: &Metrics) {
    println!(
        "{label}: episodes {} success {:.1}% chebyshev {:.2} length {:.2}",
        m.episodes, m.success_rate, m.mean_final_chebyshev, m.mean_episode_length
    );
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::InitConfig { profile, env, seed, out } => {
            let env = parse_env(&env)?;
            let mut cfg = match profile.as_str() {
                "desk" => RunConfig::desk(env, seed),
                "full" => RunConfig::full_scale(env, seed),
                other => {
                    return Err(HarnessError::Config(format!(
                        "unknown profile {other:?}; one of desk, full"
                    )))
                }
            };
            let root = out.parent().map(Path::to_path_buf).unwrap_or_default();
            if !root.as_os_str().is_empty() {
                std::fs::create_dir_all(&root)?;
            }
            cfg.paths.manifest = Some(root.join("corpus").join("manifest.json"));
            cfg.paths.cache_root = Some(root.join("caches"));
            cfg.paths.out_dir = Some(root.join("runs").join(format!("{profile}_{}", env.id())));
            cfg.save(&out)?;
            println!("wrote {profile} profile for {} to {}", env.id(), out.display());
        }
        Cmd::PrepareData { common, seed } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = match (&common.out, &cfg.paths.manifest) {
                (Some(out), _) => out.clone(),
                (None, Some(m)) => m
                    .parent()
                    .map(Path::to_path_buf)
                    .ok_or_else(|| HarnessError::Config("manifest path has no parent dir".into()))?,
                (None, None) => {
                    return Err(HarnessError::Config(
                        "no corpus location; set paths.manifest or pass --out".into(),
                    ))
                }
            };
            let n_talkers = cfg.split.train_talkers + cfg.split.test_talkers;
            let clips_per = cfg.split.train_clips_per_talker.max(cfg.split.test_clips_per_talker);
            let manifest = generate_corpus(&dir, n_talkers, clips_per, cfg.seed)?;
            println!(
                "wrote {} talkers x {clips_per} clips to {} ({})",
                manifest.0.len(),
                dir.display(),
                dir.join("manifest.json").display()
            );
        }
        Cmd::BuildBrirs { common, max_order } => {
            let cfg = load_config(&common)?;
            let root = match &common.out {
                Some(out) => out.as_path(),
                None => cache_root(&cfg)?,
            };
            let dir = root.join(cfg.env.id());
            let mut last_tenth = 0;
            let n = build_brir_cache(&dir, cfg.env, &cfg.grid, max_order, |done, total| {
                let tenth = 10 * done / total;
                if tenth > last_tenth {
                    last_tenth = tenth;
                    eprintln!("{}: {done}/{total}", cfg.env.id());
                }
            })?;
            println!("{} cache ready at {} ({n} entries)", cfg.env.id(), dir.display());
        }
        Cmd::Train { common, seed } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (train_clips, _) = load_splits(&cfg)?;
            let cache = load_cache(&cfg, cfg.env)?;
            let dir = out_dir(&cfg)?.to_path_buf();
            let result = train(&cfg, &train_clips, &cache, &dir)?;
            let tail: Vec<_> = result.log.iter().rev().take(100).collect();
            let mean_cheby =
                tail.iter().map(|r| r.final_chebyshev as f64).sum::<f64>() / tail.len() as f64;
            if let Some(ep) = result.resumed_from {
                println!("resumed at episode {ep}");
            }
            println!(
                "trained {} episodes on {} (final 100: mean chebyshev {:.2}); checkpoint at {}",
                result.checkpoint.episode,
                cfg.env.id(),
                mean_cheby,
                dir.join(CHECKPOINT_FILE).display()
            );
        }
        Cmd::Evaluate { common, checkpoint, seed } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            let ckpt_path = match checkpoint {
                Some(p) => p,
                None => out_dir(&cfg)?.join(CHECKPOINT_FILE),
            };
            let ckpt = Checkpoint::load(&ckpt_path)?;
            let (_, test_clips) = load_splits(&cfg)?;
            let cache = load_cache(&cfg, cfg.env)?;
            let metrics = evaluate(&cfg, &ckpt, &test_clips, &cache)?;
            record_result(&cfg, cfg.env.id(), metrics)?;
            print_metrics(cfg.env.id(), &metrics);
        }
        Cmd::Baseline { common, seed, episodes } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = seed {
                cfg.eval.seed = s;
            }
            let metrics =
                random_baseline(&cfg.grid, cfg.reward.max_steps, episodes, cfg.eval.seed);
            record_result(&cfg, "random", metrics)?;
            print_metrics("random", &metrics);
        }
        Cmd::Generalize { common, checkpoints, test_envs } => {
            let cfg = load_config(&common)?;
            let mut trained = Vec::new();
            for spec in &checkpoints {
                let (env, path) = spec.split_once('=').ok_or_else(|| {
                    HarnessError::Config(format!("expected ENV=PATH, got {spec:?}"))
                })?;
                trained.push((parse_env(env)?, Checkpoint::load(Path::new(path))?));
            }
            let envs: Vec<EnvId> = if test_envs.is_empty() {
                trained.iter().map(|(e, _)| *e).collect()
            } else {
                test_envs.iter().map(|s| parse_env(s)).collect::<Result<_, _>>()?
            };
            let caches: Vec<BrirCache> =
                envs.iter().map(|&e| load_cache(&cfg, e)).collect::<Result<_, _>>()?;
            let (_, test_clips) = load_splits(&cfg)?;
            let rows = generalization_matrix(&cfg, &trained, &caches, &test_clips)?;
            for row in &rows {
                let label = format!("{}->{}", row.trained_on.id(), row.tested_on.id());
                record_result(&cfg, &label, row.metrics)?;
                print_metrics(&label, &row.metrics);
            }
        }
        Cmd::Report { common } => {
            let cfg = load_config(&common)?;
            let dir = out_dir(&cfg)?.to_path_buf();
            // Prefer the config the run itself recorded; the command's
            // --config still decides where the run directory is.
            let run_cfg_path = dir.join(CONFIG_FILE);
            let run_cfg = if run_cfg_path.exists() { RunConfig::load(&run_cfg_path)? } else { cfg };
            let log_path = dir.join(LOG_FILE);
            let log = if log_path.exists() { read_log(&log_path)? } else { Vec::new() };
            let results = ResultSet::load_or_empty(&dir.join(RESULTS_FILE))?;
            emit_report(&dir, &run_cfg, &results, &log)?;
            println!(
                "report written: {}, {}, {}",
                dir.join("metrics.json").display(),
                dir.join("table.csv").display(),
                dir.join("training_curve.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
