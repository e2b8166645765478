use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dgmorl::config::{ConfigError, EnvKind, Quality, RunConfig};
use dgmorl::demos::{gen_demos, load_map, oracle_for};
use dgmorl::report::cmd_report;
use dgmorl::run::cmd_run;
use dgmorl_core::demo::DemoRepository;
use dgmorl_core::envs::{DstEnv, LockEnv};

#[derive(Parser)]
#[command(name = "dgmorl", version, about = "Demonstration-guided multi-objective RL experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train every configured seed and write one directory per seed.
    Run { config: PathBuf },
    /// Exhaustive coverage set, corner weights and EU for the configured environment.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write oracle-derived demonstrations in the repository file format.
    GenDemos {
        config: PathBuf,
        #[arg(long, value_parser = parse_quality, default_value = "optimal")]
        quality: Quality,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate metrics of finished runs into CSV and a text table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

fn parse_quality(s: &str) -> Result<Quality, String> {
    match s {
        "optimal" => Ok(Quality::Optimal),
        "medium" => Ok(Quality::Medium),
        "low" => Ok(Quality::Low),
        other => Err(format!("unknown quality '{other}' (expected optimal, medium or low)")),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn demo_text(cfg: &RunConfig, seqs: &[Vec<usize>]) -> anyhow::Result<String> {
    let h = cfg.env.horizon();
    let repo = match cfg.env.kind {
        EnvKind::Dst => DemoRepository::init(&mut DstEnv::new(load_map(&cfg.env)?, h, cfg.env.gamma)?, seqs)?,
        EnvKind::Lock => DemoRepository::init(&mut LockEnv::new(h, cfg.env.gamma)?, seqs)?,
    };
    Ok(repo.to_text())
}

fn dispatch(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            for r in cmd_run(&cfg)? {
                let eu = r.output.metrics.summary.as_ref().map_or(f64::NAN, |s| s.final_eu);
                println!("seed {} final_eu {eu:.6} -> {}", r.seed, r.dir.display());
            }
        }
        Cmd::Oracle { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let o = oracle_for(&cfg.env, cfg.curriculum.eval_weight_count)?;
            emit(out.as_deref(), &o.to_text())?;
        }
        Cmd::GenDemos { config, quality, count, out } => {
            let cfg = RunConfig::load(&config)?;
            let seqs = gen_demos(&cfg.env, quality, count)?;
            emit(Some(&out), &demo_text(&cfg, &seqs)?)?;
        }
        Cmd::Report { runs, out } => {
            let rows = cmd_report(&runs, &out)?;
            println!("{} rows -> {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<ConfigError>() {
                Some(ConfigError::Parse { .. }) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
