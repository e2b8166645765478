//! Seeded runs: one worker thread and one output directory per seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use dgmorl_core::curriculum::{train, train_baseline, CurriculumError, RunOutput};
use dgmorl_core::demo::{load_sequences, DemoError, DemoRepository};
use dgmorl_core::envs::{DstEnv, EnvError, Environment, LockEnv};
use dgmorl_core::mo::format_f64;
use thiserror::Error;

use crate::config::{EnvKind, Mode, RunConfig};
use crate::demos::{gen_demos, load_map, oracle_for, DemoGenError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    DemoGen(#[from] DemoGenError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("seed {seed}: {source}")]
    Seed { seed: u64, source: Box<RunError> },
}

/// What one seed left on disk.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub output: RunOutput,
    /// Training wall time, excluding file output.
    pub elapsed: Duration,
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed-{seed}"))
}

/// Prior demonstrations named by the config, or none in baseline mode.
pub fn prior_sequences(cfg: &RunConfig) -> Result<Option<Vec<Vec<usize>>>, RunError> {
    if cfg.mode == Mode::EpsilonGreedy0init {
        return Ok(None);
    }
    let seqs = match cfg.demos.source.as_str() {
        "builtin" => gen_demos(&cfg.env, cfg.demos.quality, cfg.demos.count)?,
        path => load_sequences(Path::new(path))?,
    };
    Ok(Some(seqs))
}

fn run_env<E: Environment>(mut env: E, cfg: &RunConfig, seqs: Option<&[Vec<usize>]>, seed: u64) -> Result<RunOutput, RunError> {
    let ccfg = cfg.curriculum_for(seed);
    let lcfg = cfg.learner_config();
    Ok(match seqs {
        None => train_baseline(env, ccfg, lcfg)?,
        Some(seqs) => {
            let repo = DemoRepository::init(&mut env, seqs)?;
            train(env, repo, ccfg, lcfg)?
        }
    })
}

/// Trains one seed in memory.
pub fn run_seed(cfg: &RunConfig, seqs: Option<&[Vec<usize>]>, seed: u64) -> Result<RunOutput, RunError> {
    let h = cfg.env.horizon();
    match cfg.env.kind {
        EnvKind::Dst => run_env(DstEnv::new(load_map(&cfg.env)?, h, cfg.env.gamma)?, cfg, seqs, seed),
        EnvKind::Lock => run_env(LockEnv::new(h, cfg.env.gamma)?, cfg, seqs, seed),
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), RunError> {
    std::fs::write(&path, text).map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

fn summary_text(cfg: &RunConfig, seed: u64, out: &RunOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed={seed}");
    if let Some(sum) = &out.metrics.summary {
        let _ = writeln!(s, "mode={}", sum.mode);
        let _ = writeln!(s, "global_step={}", sum.global_step);
        let _ = writeln!(s, "eval_step={}", sum.eval_step);
        let _ = writeln!(s, "rounds={}", sum.rounds);
        let _ = writeln!(s, "final_eu={}", format_f64(sum.final_eu));
        if let Ok(o) = oracle_for(&cfg.env, cfg.curriculum.eval_weight_count) {
            let _ = writeln!(s, "oracle_eu={}", format_f64(o.eu));
            if o.eu != 0.0 {
                let _ = writeln!(s, "eu_ratio={}", format_f64(sum.final_eu / o.eu));
            }
        }
    }
    s
}

/// Writes `metrics.log`, `rounds.log`, `config.toml`, `demos.txt` and
/// `summary.txt` for one finished seed.
pub fn write_seed(cfg: &RunConfig, seed: u64, out: &RunOutput, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.display().to_string(), source })?;
    write(dir.join("metrics.log"), &out.metrics.to_text())?;
    let rounds: String = out.rounds.iter().map(|r| r.to_line() + "\n").collect();
    write(dir.join("rounds.log"), &rounds)?;
    write(dir.join("config.toml"), &cfg.snapshot(Some(seed)))?;
    let demos = out.repo.as_ref().map_or_else(|| "# no demonstrations\n".to_string(), |r| r.to_text());
    write(dir.join("demos.txt"), &demos)?;
    write(dir.join("summary.txt"), &summary_text(cfg, seed, out))
}

/// Runs every configured seed on its own thread and writes the results
/// under `output_dir`.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<SeedRun>, RunError> {
    let seqs = prior_sequences(cfg)?;
    let results: Vec<Result<SeedRun, RunError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .seeds
            .iter()
            .map(|&seed| {
                let seqs = seqs.as_deref();
                scope.spawn(move || {
                    let wrap = |e: RunError| RunError::Seed { seed, source: Box::new(e) };
                    let start = Instant::now();
                    let output = run_seed(cfg, seqs, seed).map_err(wrap)?;
                    let elapsed = start.elapsed();
                    let dir = seed_dir(&cfg.output_dir, seed);
                    write_seed(cfg, seed, &output, &dir).map_err(wrap)?;
                    Ok(SeedRun { seed, dir, output, elapsed })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
    });
    results.into_iter().collect()
}
