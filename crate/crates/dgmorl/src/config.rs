//! Run configuration: a TOML file with `[env]`, `[demos]`, `[curriculum]` and
//! `[learner]` sections, every key defaulted, plus `DGMORL_SECTION__KEY`
//! environment overrides applied after parsing.

use std::path::{Path, PathBuf};

use dgmorl_core::curriculum::{BetaSchedule, CurriculumConfig, PassRule};
use dgmorl_core::learner::{EpsilonSchedule, LearnerConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "DGMORL_";
pub const DEFAULT_SEEDS: [u64; 5] = [2, 7, 15, 42, 78];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("override {var}: {msg}")]
    Override { var: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    DgMorl,
    #[serde(rename = "epsilon_greedy_0init")]
    EpsilonGreedy0init,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Dst,
    Lock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Optimal,
    Medium,
    Low,
}

impl Quality {
    /// Wasted steps prepended to each optimal sequence.
    pub fn padding(self) -> usize {
        match self {
            Quality::Optimal => 0,
            Quality::Medium => 2,
            Quality::Low => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// DST map file; the bundled map when absent.
    pub map: Option<PathBuf>,
    /// Defaults to 100 for DST and 8 for the lock.
    pub horizon: Option<usize>,
    pub gamma: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { kind: EnvKind::Dst, map: None, horizon: None, gamma: 0.99 }
    }
}

impl EnvConfig {
    pub fn horizon(&self) -> usize {
        self.horizon.unwrap_or(match self.kind {
            EnvKind::Dst => 100,
            EnvKind::Lock => 8,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    /// `builtin` generates demonstrations from the oracle; anything else is a
    /// demonstration file path.
    pub source: String,
    pub quality: Quality,
    /// Number of builtin demonstrations; all oracle entries when absent.
    pub count: Option<usize>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig { source: "builtin".into(), quality: Quality::Optimal, count: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSection {
    pub max_steps: u64,
    pub rollback_span: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_ramp_rounds: usize,
    pub eval_period: u64,
    pub rollouts_per_h: usize,
    pub max_attempts_per_h: usize,
    pub eval_weight_count: usize,
    pub pass_rule: String,
}

impl Default for CurriculumSection {
    fn default() -> Self {
        let c = CurriculumConfig::default();
        CurriculumSection {
            max_steps: c.max_steps,
            rollback_span: c.rollback_span,
            beta_start: c.beta.start,
            beta_end: c.beta.end,
            beta_ramp_rounds: c.beta.ramp_rounds,
            eval_period: c.eval_period,
            rollouts_per_h: c.rollouts_per_h,
            max_attempts_per_h: c.max_attempts_per_h,
            eval_weight_count: c.eval_weight_count,
            pass_rule: c.pass_rule.as_str().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub alpha: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub updates_per_step: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_steps: u64,
    pub baseline_weight_count: usize,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let l = LearnerConfig::default();
        LearnerSection {
            alpha: l.alpha,
            batch_size: l.batch_size,
            buffer_capacity: l.buffer_capacity,
            updates_per_step: l.updates_per_step,
            epsilon_start: l.epsilon.start,
            epsilon_end: l.epsilon.end,
            epsilon_anneal_steps: l.epsilon.anneal_steps,
            baseline_weight_count: l.baseline_weight_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub mode: Mode,
    pub self_evolving: bool,
    pub env: EnvConfig,
    pub demos: DemoConfig,
    pub curriculum: CurriculumSection,
    pub learner: LearnerSection,
    /// Applied overrides, recorded in the snapshot.
    #[serde(skip)]
    pub overrides: Vec<(String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: DEFAULT_SEEDS.to_vec(),
            output_dir: PathBuf::from("runs"),
            mode: Mode::DgMorl,
            self_evolving: true,
            env: EnvConfig::default(),
            demos: DemoConfig::default(),
            curriculum: CurriculumSection::default(),
            learner: LearnerSection::default(),
            overrides: Vec::new(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// A literal override value: TOML syntax when it parses, a bare string otherwise.
fn override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    /// Parses file text, then applies `DGMORL_SECTION__KEY=value` pairs from
    /// `vars`; other variables are ignored.
    pub fn parse<I>(text: &str, origin: &str, vars: I) -> Result<RunConfig, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let parse_err = |e: toml::de::Error| ConfigError::Parse {
            path: origin.to_string(),
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        };
        toml::from_str::<RunConfig>(text).map_err(parse_err)?;
        let mut table: toml::Table = text.parse().map_err(parse_err)?;
        let mut applied = Vec::new();
        let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        for (var, raw) in vars {
            let path = var[ENV_PREFIX.len()..].to_lowercase();
            let (section, key) = match path.split_once("__") {
                Some((s, k)) => (Some(s.to_string()), k.to_string()),
                None => (None, path.clone()),
            };
            let target = match &section {
                None => &mut table,
                Some(s) => match table.entry(s.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new())) {
                    toml::Value::Table(t) => t,
                    _ => return Err(ConfigError::Override { var, msg: format!("`{s}` is not a section") }),
                },
            };
            target.insert(key, override_value(&raw));
            applied.push((var, raw));
        }
        let mut cfg = RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| ConfigError::Override {
            var: applied.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(","),
            msg: e.message().to_string(),
        })?;
        cfg.overrides = applied;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        RunConfig::parse(&text, &path.display().to_string(), std::env::vars())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must not be empty".into()));
        }
        self.curriculum.pass_rule.parse::<PassRule>().map_err(ConfigError::Invalid)?;
        self.curriculum_for(0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.learner_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if matches!(self.env.kind, EnvKind::Lock) && self.demos.quality != Quality::Optimal {
            return Err(ConfigError::Invalid("the lock only has optimal demonstrations".into()));
        }
        Ok(())
    }

    pub fn curriculum_for(&self, seed: u64) -> CurriculumConfig {
        let c = &self.curriculum;
        CurriculumConfig {
            max_steps: c.max_steps,
            rollback_span: c.rollback_span,
            beta: BetaSchedule { start: c.beta_start, end: c.beta_end, ramp_rounds: c.beta_ramp_rounds },
            eval_period: c.eval_period,
            rollouts_per_h: c.rollouts_per_h,
            max_attempts_per_h: c.max_attempts_per_h,
            eval_weight_count: c.eval_weight_count,
            seed,
            pass_rule: c.pass_rule.parse().unwrap_or_default(),
            self_evolving: self.self_evolving,
        }
    }

    pub fn learner_config(&self) -> LearnerConfig {
        let l = &self.learner;
        LearnerConfig {
            alpha: l.alpha,
            batch_size: l.batch_size,
            buffer_capacity: l.buffer_capacity,
            updates_per_step: l.updates_per_step,
            epsilon: EpsilonSchedule { start: l.epsilon_start, end: l.epsilon_end, anneal_steps: l.epsilon_anneal_steps },
            baseline_weight_count: l.baseline_weight_count,
        }
    }

    /// Fully explicit TOML for the output directory, overrides listed first.
    pub fn snapshot(&self, seed: Option<u64>) -> String {
        let mut out = String::new();
        for (k, v) in &self.overrides {
            out.push_str(&format!("# override {k}={v}\n"));
        }
        let mut explicit = self.clone();
        explicit.env.horizon = Some(self.env.horizon());
        if let Some(s) = seed {
            explicit.seeds = vec![s];
        }
        out.push_str(&toml::to_string(&explicit).expect("config serializes"));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_vars() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg = RunConfig::parse("", "t", no_vars()).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.seeds, vec![2, 7, 15, 42, 78]);
        assert_eq!(cfg.env.horizon(), 100);
        assert_eq!(cfg.learner_config(), LearnerConfig::default());
        assert_eq!(cfg.curriculum_for(0), CurriculumConfig::default());
    }

    #[test]
    fn sections_parse() {
        let text = "seeds = [1]\nmode = \"epsilon_greedy_0init\"\n[env]\nkind = \"lock\"\nhorizon = 12\n[curriculum]\nmax_steps = 10\npass_rule = \"strict\"\n[learner]\nbatch_size = 4\n";
        let cfg = RunConfig::parse(text, "t", no_vars()).unwrap();
        assert_eq!(cfg.mode, Mode::EpsilonGreedy0init);
        assert_eq!(cfg.env.kind, EnvKind::Lock);
        assert_eq!(cfg.env.horizon(), 12);
        let c = cfg.curriculum_for(9);
        assert_eq!((c.max_steps, c.seed, c.pass_rule), (10, 9, PassRule::Strict));
        assert_eq!(cfg.learner_config().batch_size, 4);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("seeds = [1]\n[curriculum]\nmax_stepz = 3\n", "cfg.toml", no_vars()).unwrap_err();
        match err {
            ConfigError::Parse { line, ref msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("max_stepz"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        let err = RunConfig::parse("[env]\ngamma = = 1\n", "cfg.toml", no_vars()).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err:?}");
        assert!(err.to_string().starts_with("cfg.toml: line 2:"));
    }

    #[test]
    fn overrides_apply_after_file() {
        let vars = vec![
            ("DGMORL_CURRICULUM__MAX_STEPS".to_string(), "77".to_string()),
            ("DGMORL_ENV__KIND".to_string(), "lock".to_string()),
            ("DGMORL_SEEDS".to_string(), "[3, 4]".to_string()),
            ("HOME".to_string(), "/x".to_string()),
        ];
        let cfg = RunConfig::parse("[curriculum]\nmax_steps = 5\n", "t", vars).unwrap();
        assert_eq!(cfg.curriculum.max_steps, 77);
        assert_eq!(cfg.env.kind, EnvKind::Lock);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.overrides.len(), 3);
        let snap = cfg.snapshot(Some(3));
        assert!(snap.contains("# override DGMORL_CURRICULUM__MAX_STEPS=77"));
        let back = RunConfig::parse(&snap, "snap", no_vars()).unwrap();
        assert_eq!(back.seeds, vec![3]);
        assert_eq!(back.curriculum, cfg.curriculum);
        assert_eq!(back.env.horizon, Some(8));
    }

    #[test]
    fn bad_override_is_reported() {
        let vars = vec![("DGMORL_CURRICULUM__MAX_STEPS".to_string(), "many".to_string())];
        assert!(matches!(RunConfig::parse("", "t", vars), Err(ConfigError::Override { .. })));
        let vars = vec![("DGMORL_CURRICULUM__NOPE".to_string(), "1".to_string())];
        assert!(matches!(RunConfig::parse("", "t", vars), Err(ConfigError::Override { .. })));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(matches!(RunConfig::parse("seeds = []", "t", no_vars()), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            RunConfig::parse("[curriculum]\npass_rule = \"loose\"", "t", no_vars()),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::parse("[env]\nkind = \"lock\"\n[demos]\nquality = \"low\"", "t", no_vars()),
            Err(ConfigError::Invalid(_))
        ));
    }
}
