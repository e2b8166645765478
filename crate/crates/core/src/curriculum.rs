//! The demonstration-guided training loop: pick the corner weight where the
//! agent lags the guide set most, hand the episode prefix to the best guide
//! for that weight, and shrink the prefix each time the mixed policy keeps up.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::demo::{DemoError, DemoRepository};
use crate::envs::{discounted_return, EnvError, Environment, Transition};
use crate::learner::{
    act_epsilon, policy_value, train_batch, LearnerConfig, LearnerError, PolicyEvaluator, QTable, ReplayBuffer,
    WeightKey,
};
use crate::mo::{
    corner_weights, equidistant_weights, expected_utility, format_f64, max_utility_over_set, parse_f64, utility,
    CornerWeightSet, MoError, ValueVector, WeightVector, GEOMETRY_TOL,
};

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("coverage set is empty")]
    EmptyCcs,
    #[error("demonstration repository is empty")]
    EmptyRepository,
    #[error("training budget exhausted")]
    BudgetExhausted,
    #[error("invalid curriculum config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mo(#[from] MoError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// How an evaluated mixed rollout is compared with `beta * u_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PassRule {
    /// `u >= beta * u_threshold`; a mixed policy that matches the guide passes.
    #[default]
    Inclusive,
    /// `u > beta * u_threshold`; the tail must beat the guide outright.
    Strict,
}

impl PassRule {
    pub fn passes(self, u: f64, threshold: f64) -> bool {
        match self {
            PassRule::Inclusive => u >= threshold,
            PassRule::Strict => u > threshold,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PassRule::Inclusive => "inclusive",
            PassRule::Strict => "strict",
        }
    }
}

impl FromStr for PassRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inclusive" => Ok(PassRule::Inclusive),
            "strict" => Ok(PassRule::Strict),
            other => Err(format!("unknown pass rule '{other}' (expected inclusive or strict)")),
        }
    }
}

/// Linear ramp of the passing percentage, advanced once per round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub start: f64,
    pub end: f64,
    pub ramp_rounds: usize,
}

pub fn update_beta(schedule: &BetaSchedule, round: usize) -> f64 {
    if schedule.ramp_rounds == 0 {
        return schedule.end;
    }
    let ramp = schedule.start + (schedule.end - schedule.start) * round as f64 / schedule.ramp_rounds as f64;
    ramp.min(schedule.end)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumConfig {
    /// Training budget in environment steps; evaluation rollouts are not counted.
    pub max_steps: u64,
    pub rollback_span: usize,
    pub beta: BetaSchedule,
    pub eval_period: u64,
    /// Exploratory mixed rollouts per attempt at one prefix length.
    pub rollouts_per_h: usize,
    pub max_attempts_per_h: usize,
    pub eval_weight_count: usize,
    pub seed: u64,
    pub pass_rule: PassRule,
    pub self_evolving: bool,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            max_steps: 40_000,
            rollback_span: 2,
            beta: BetaSchedule { start: 1.0, end: 1.0, ramp_rounds: 1 },
            eval_period: 4_000,
            rollouts_per_h: 1,
            max_attempts_per_h: 50,
            eval_weight_count: 100,
            seed: 0,
            pass_rule: PassRule::Inclusive,
            self_evolving: true,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        let bad = |m: &str| Err(CurriculumError::InvalidConfig(m.to_string()));
        if self.rollback_span < 1 {
            return bad("rollback_span must be >= 1");
        }
        let b = &self.beta;
        if !(0.0 < b.start && b.start <= b.end && b.end <= 1.0) {
            return bad("need 0 < beta_start <= beta_end <= 1");
        }
        if self.eval_period < 1 {
            return bad("eval_period must be >= 1");
        }
        if self.rollouts_per_h < 1 || self.max_attempts_per_h < 1 {
            return bad("rollouts_per_h and max_attempts_per_h must be >= 1");
        }
        if self.eval_weight_count < 1 {
            return bad("eval_weight_count must be >= 1");
        }
        Ok(())
    }
}

fn pick_corner(
    corners: &CornerWeightSet,
    ccs_values: &[ValueVector],
    agent_values: &[ValueVector],
    trained: &[WeightKey],
) -> Result<WeightVector, CurriculumError> {
    let mut gaps = Vec::with_capacity(corners.len());
    for w in &corners.weights {
        let (target, _) = max_utility_over_set(ccs_values, w)?;
        let agent = if agent_values.is_empty() { 0.0 } else { max_utility_over_set(agent_values, w)?.0 };
        gaps.push(target - agent);
    }
    let best = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<&WeightVector> =
        corners.weights.iter().zip(&gaps).filter(|(_, g)| **g >= best - GEOMETRY_TOL).map(|(w, _)| w).collect();
    let fresh = tied.iter().find(|w| !trained.contains(&WeightKey::of(w)));
    fresh.or(tied.first()).map(|w| (*w).clone()).ok_or(CurriculumError::EmptyCcs)
}

/// Corner weight with the largest utility gap between the coverage set and
/// the agent's policies. Gaps within the geometry band tie; ties prefer a
/// corner the agent has no policy for yet, then enumeration order.
pub fn candidate_weight(
    ccs_values: &[ValueVector],
    agent_values: &[ValueVector],
    trained: &[WeightKey],
) -> Result<WeightVector, CurriculumError> {
    if ccs_values.is_empty() {
        return Err(CurriculumError::EmptyCcs);
    }
    let corners = corner_weights(ccs_values)?;
    pick_corner(&corners, ccs_values, agent_values, trained)
}

fn mixed_action(guide: &[usize], h: i64, t: usize) -> Option<usize> {
    if (t as i64) < h {
        guide.get(t).copied()
    } else {
        None
    }
}

/// Greedy mixed rollout: guide actions for the first `h` steps, the
/// exploration policy under `w_c` afterwards. Nothing is written to replay.
/// Returns the utility under `w_c`, the exact return and the actions taken.
pub fn evaluate_mixed<E: Environment>(
    env: &mut E,
    guide: &[usize],
    q: &QTable,
    h: i64,
    w_c: &WeightVector,
) -> Result<(f64, ValueVector, Vec<usize>), CurriculumError> {
    let horizon = env.spec().horizon;
    let mut s = env.reset();
    let mut traj = Vec::new();
    for t in 0..horizon {
        let a = mixed_action(guide, h, t).unwrap_or_else(|| q.greedy_action(s, w_c));
        let tr = env.step(a)?;
        s = tr.next_state;
        let done = tr.terminal;
        traj.push(tr);
        if done {
            break;
        }
    }
    let value = discounted_return(&traj, env.spec().gamma, env.spec().objectives);
    let actions = traj.iter().map(|t| t.action).collect();
    Ok((utility(&value, w_c)?, value, actions))
}

/// One evaluation record of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub global_step: u64,
    pub eval_step: u64,
    pub eu: f64,
    pub ccs_size: usize,
    pub active_demos: usize,
    pub w_c: Option<WeightVector>,
    pub h: i64,
    pub beta: f64,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: String,
    pub global_step: u64,
    pub eval_step: u64,
    pub final_eu: f64,
    pub rounds: usize,
    pub demos: usize,
    pub active_demos: usize,
    pub ccs_size: usize,
}

/// Line-delimited `key=value` records: one `eval` line per evaluation and a
/// closing `summary` line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub records: Vec<EvalRecord>,
    pub summary: Option<RunSummary>,
}

fn weight_field(w: &Option<WeightVector>) -> String {
    match w {
        Some(w) => join_floats(w.as_slice()),
        None => "-".into(),
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| format_f64(*x)).collect::<Vec<_>>().join(",")
}

fn split_floats(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

#[derive(Debug, Error, PartialEq)]
#[error("metrics line {line}: {msg}")]
pub struct MetricsParseError {
    pub line: usize,
    pub msg: String,
}

fn fields(rest: &str) -> Vec<(&str, &str)> {
    rest.split_whitespace().filter_map(|kv| kv.split_once('=')).collect()
}

fn field<'a>(kv: &[(&'a str, &'a str)], key: &str) -> Option<&'a str> {
    kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

impl MetricsLog {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(
                out,
                "eval global_step={} eval_step={} eu={} ccs_size={} active_demos={} w_c={} h_final={} beta={} round={}",
                r.global_step,
                r.eval_step,
                format_f64(r.eu),
                r.ccs_size,
                r.active_demos,
                weight_field(&r.w_c),
                r.h,
                format_f64(r.beta),
                r.round
            );
        }
        if let Some(s) = &self.summary {
            let _ = writeln!(
                out,
                "summary mode={} global_step={} eval_step={} final_eu={} rounds={} demos={} active_demos={} ccs_size={}",
                s.mode,
                s.global_step,
                s.eval_step,
                format_f64(s.final_eu),
                s.rounds,
                s.demos,
                s.active_demos,
                s.ccs_size
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<MetricsLog, MetricsParseError> {
        let mut log = MetricsLog::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: &str| MetricsParseError { line, msg: msg.to_string() };
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (kind, rest) = raw.split_once(' ').unwrap_or((raw, ""));
            let kv = fields(rest);
            let get = |k: &str| field(&kv, k).ok_or_else(|| err(&format!("missing {k}")));
            let int = |k: &str| get(k)?.parse::<u64>().map_err(|_| err(&format!("bad integer in {k}")));
            let float = |k: &str| get(k).and_then(|v| parse_f64(v).ok_or_else(|| err(&format!("bad number in {k}"))));
            match kind {
                "eval" => {
                    let w_c = match get("w_c")? {
                        "-" => None,
                        s => {
                            let xs = split_floats(s).ok_or_else(|| err("bad w_c"))?;
                            Some(crate::mo::make_weight(&xs).map_err(|e| err(&e.to_string()))?)
                        }
                    };
                    log.records.push(EvalRecord {
                        global_step: int("global_step")?,
                        eval_step: int("eval_step")?,
                        eu: float("eu")?,
                        ccs_size: int("ccs_size")? as usize,
                        active_demos: int("active_demos")? as usize,
                        w_c,
                        h: get("h_final")?.parse().map_err(|_| err("bad h_final"))?,
                        beta: float("beta")?,
                        round: int("round")? as usize,
                    });
                }
                "summary" => {
                    log.summary = Some(RunSummary {
                        mode: get("mode")?.to_string(),
                        global_step: int("global_step")?,
                        eval_step: int("eval_step")?,
                        final_eu: float("final_eu")?,
                        rounds: int("rounds")? as usize,
                        demos: int("demos")? as usize,
                        active_demos: int("active_demos")? as usize,
                        ccs_size: int("ccs_size")? as usize,
                    });
                }
                other => return Err(err(&format!("unknown record kind '{other}'"))),
            }
        }
        Ok(log)
    }
}

/// What happened in one completed round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub w_c: WeightVector,
    pub guide_id: String,
    pub u_threshold: f64,
    pub beta: f64,
    /// Prefix length after each pass, starting with the initial one.
    pub h_trace: Vec<i64>,
    pub attempts: usize,
    pub global_step: u64,
    pub corners: Vec<WeightVector>,
    /// Coverage set values after pruning, at the end of the round.
    pub ccs: Vec<ValueVector>,
}

impl RoundRecord {
    pub fn to_line(&self) -> String {
        let vecs = |vs: Vec<&[f64]>| vs.into_iter().map(join_floats).collect::<Vec<_>>().join(";");
        format!(
            "round index={} global_step={} w_c={} guide={} u_threshold={} beta={} attempts={} h_trace={} corners={} ccs={}",
            self.round,
            self.global_step,
            join_floats(self.w_c.as_slice()),
            self.guide_id,
            format_f64(self.u_threshold),
            format_f64(self.beta),
            self.attempts,
            self.h_trace.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
            vecs(self.corners.iter().map(|w| w.as_slice()).collect()),
            vecs(self.ccs.iter().map(|v| v.as_slice()).collect()),
        )
    }

    /// Parses the corner weights and coverage values back out of a round line.
    pub fn parse_geometry(line: &str) -> Option<(usize, Vec<WeightVector>, Vec<ValueVector>)> {
        let rest = line.strip_prefix("round ")?;
        let kv = fields(rest);
        let round = field(&kv, "index")?.parse().ok()?;
        let corners = field(&kv, "corners")?
            .split(';')
            .map(|s| split_floats(s).and_then(|xs| crate::mo::make_weight(&xs).ok()))
            .collect::<Option<Vec<_>>>()?;
        let ccs = field(&kv, "ccs")?
            .split(';')
            .map(|s| split_floats(s).and_then(|xs| ValueVector::new(xs).ok()))
            .collect::<Option<Vec<_>>>()?;
        Some((round, corners, ccs))
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsLog,
    pub rounds: Vec<RoundRecord>,
    pub repo: Option<DemoRepository>,
    pub q: QTable,
}

/// Owns the environment, learner and repository for one seeded run.
pub struct Trainer<E: Environment> {
    env: E,
    eval_env: E,
    q: QTable,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    evaluator: PolicyEvaluator,
    repo: Option<DemoRepository>,
    cfg: CurriculumConfig,
    lcfg: LearnerConfig,
    eval_weights: Vec<WeightVector>,
    metrics: MetricsLog,
    rounds: Vec<RoundRecord>,
    global_step: u64,
    eval_step: u64,
    round: usize,
    h: i64,
    w_c: Option<WeightVector>,
    beta: f64,
}

impl<E: Environment> Trainer<E> {
    pub fn new(
        env: E,
        repo: Option<DemoRepository>,
        cfg: CurriculumConfig,
        lcfg: LearnerConfig,
    ) -> Result<Trainer<E>, CurriculumError> {
        cfg.validate()?;
        lcfg.validate()?;
        if let Some(r) = &repo {
            if r.active_count() == 0 {
                return Err(CurriculumError::EmptyRepository);
            }
        }
        let d = env.spec().objectives;
        let eval_weights = equidistant_weights(d, cfg.eval_weight_count)?;
        Ok(Trainer {
            eval_env: env.clone(),
            q: QTable::new(env.spec()),
            env,
            buffer: ReplayBuffer::new(lcfg.buffer_capacity),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            evaluator: PolicyEvaluator::new(),
            repo,
            beta: update_beta(&cfg.beta, 0),
            cfg,
            lcfg,
            eval_weights,
            metrics: MetricsLog::default(),
            rounds: Vec::new(),
            global_step: 0,
            eval_step: 0,
            round: 0,
            h: 0,
            w_c: None,
        })
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn repo(&self) -> Option<&DemoRepository> {
        self.repo.as_ref()
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn h(&self) -> i64 {
        self.h
    }

    /// Greedy values of every policy the agent has trained, one per
    /// conditioning weight.
    pub fn agent_values(&mut self) -> Result<Vec<ValueVector>, CurriculumError> {
        let keys = self.q.trained_weights();
        let before = self.evaluator.eval_steps;
        let vs = self.evaluator.policy_set_values(&self.q, &mut self.eval_env, &keys)?;
        self.eval_step += self.evaluator.eval_steps - before;
        Ok(vs)
    }

    /// Expected utility of the agent's own policies over the evaluation grid.
    /// An untrained agent is scored as its single zero-initialized policy.
    pub fn evaluate_eu(&mut self) -> Result<f64, CurriculumError> {
        let mut values = self.agent_values()?;
        if values.is_empty() {
            let w = WeightVector::uniform(self.env.spec().objectives);
            let (v, steps) = policy_value(&self.q, &mut self.eval_env, &w)?;
            self.eval_step += steps as u64;
            values.push(v);
        }
        Ok(expected_utility(&values, &self.eval_weights)?)
    }

    fn record_eval(&mut self) -> Result<(), CurriculumError> {
        let eu = self.evaluate_eu()?;
        let (ccs_size, active_demos) = match &self.repo {
            Some(r) => (r.ccs().len(), r.active_count()),
            None => (0, 0),
        };
        self.metrics.records.push(EvalRecord {
            global_step: self.global_step,
            eval_step: self.eval_step,
            eu,
            ccs_size,
            active_demos,
            w_c: self.w_c.clone(),
            h: self.h,
            beta: self.beta,
            round: self.round,
        });
        Ok(())
    }

    /// One training environment step: act, store, learn, maybe evaluate.
    fn step(&mut self, action: usize, w: &WeightVector) -> Result<Transition, CurriculumError> {
        let tr = self.env.step(action)?;
        self.buffer.push(tr.clone(), w.clone());
        for _ in 0..self.lcfg.updates_per_step {
            train_batch(&mut self.q, &self.buffer, w, self.lcfg.alpha, self.env.spec().gamma, self.lcfg.batch_size, &mut self.rng)?;
        }
        self.global_step += 1;
        if self.global_step % self.cfg.eval_period == 0 {
            self.record_eval()?;
        }
        if self.global_step >= self.cfg.max_steps {
            return Err(CurriculumError::BudgetExhausted);
        }
        Ok(tr)
    }

    /// Guide prefix of length `h`, then epsilon-greedy exploration under
    /// `w_c`. Every transition is trained on and tagged with `w_c`.
    /// Returns the trajectory, its exact return and the steps consumed.
    pub fn mixed_rollout(
        &mut self,
        guide: &[usize],
        h: i64,
        w_c: &WeightVector,
    ) -> Result<(Vec<Transition>, ValueVector, usize), CurriculumError> {
        let horizon = self.env.spec().horizon;
        let mut s = self.env.reset();
        let mut traj = Vec::new();
        for t in 0..horizon {
            let a = match mixed_action(guide, h, t) {
                Some(a) => a,
                None => act_epsilon(&self.q, s, w_c, &self.lcfg.epsilon, self.global_step, &mut self.rng),
            };
            let tr = self.step(a, w_c)?;
            s = tr.next_state;
            let done = tr.terminal;
            traj.push(tr);
            if done {
                break;
            }
        }
        let value = discounted_return(&traj, self.env.spec().gamma, self.env.spec().objectives);
        let steps = traj.len();
        Ok((traj, value, steps))
    }

    /// One outer iteration: choose the corner weight and guide, then roll
    /// the guide prefix back while the mixed policy keeps passing.
    pub fn run_round(&mut self) -> Result<RoundRecord, CurriculumError> {
        let repo = self.repo.as_ref().ok_or(CurriculumError::EmptyRepository)?;
        let ccs_values = repo.ccs().values();
        if ccs_values.is_empty() {
            return Err(CurriculumError::EmptyCcs);
        }
        let corners = corner_weights(&ccs_values)?;
        let agent = self.agent_values()?;
        let trained: Vec<WeightKey> = self.q.trained_weights().iter().map(WeightKey::of).collect();
        let w_c = pick_corner(&corners, &ccs_values, &agent, &trained)?;
        let u_e = if agent.is_empty() { 0.0 } else { max_utility_over_set(&agent, &w_c)?.0 };
        let guide = self.repo.as_ref().expect("checked").select_guide(&w_c, u_e)?.clone();
        let u_threshold = utility(&guide.value, &w_c)?;
        let horizon = self.env.spec().horizon;
        // Prefixes at least as long as the guide all replay it in full, so
        // skip straight to the last such level on the H, H - dh, .. ladder.
        let span = self.cfg.rollback_span;
        let len = guide.actions.len().min(horizon);
        self.h = (horizon - (horizon - len) / span * span) as i64;
        self.w_c = Some(w_c.clone());
        let mut h_trace = vec![self.h];
        let mut attempts = 0;
        let round_beta = self.beta;
        while self.h >= 0 {
            let mut passed = false;
            for _ in 0..self.cfg.max_attempts_per_h {
                attempts += 1;
                for _ in 0..self.cfg.rollouts_per_h {
                    self.mixed_rollout(&guide.actions, self.h, &w_c)?;
                }
                let (u, value, actions) = evaluate_mixed(&mut self.eval_env, &guide.actions, &self.q, self.h, &w_c)?;
                self.eval_step += actions.len() as u64;
                if self.cfg.pass_rule.passes(u, round_beta * u_threshold) {
                    if self.cfg.self_evolving {
                        let repo = self.repo.as_mut().expect("checked");
                        repo.absorb(&mut self.eval_env, &actions, value, self.round)?;
                    }
                    self.h -= self.cfg.rollback_span as i64;
                    h_trace.push(self.h);
                    passed = true;
                    break;
                }
            }
            if !passed {
                break;
            }
        }
        let repo = self.repo.as_mut().expect("checked");
        repo.prune();
        let record = RoundRecord {
            round: self.round,
            w_c,
            guide_id: guide.id.clone(),
            u_threshold,
            beta: round_beta,
            h_trace,
            attempts,
            global_step: self.global_step,
            corners: corners.weights,
            ccs: repo.ccs().values(),
        };
        self.round += 1;
        self.beta = update_beta(&self.cfg.beta, self.round);
        Ok(record)
    }

    fn summary(&mut self, mode: &str) -> Result<RunSummary, CurriculumError> {
        let final_eu = match self.metrics.records.last() {
            Some(r) if r.global_step == self.global_step => r.eu,
            _ => self.evaluate_eu()?,
        };
        let (demos, active_demos, ccs_size) = match &self.repo {
            Some(r) => (r.demos().len(), r.active_count(), r.ccs().len()),
            None => (0, 0, 0),
        };
        Ok(RunSummary {
            mode: mode.to_string(),
            global_step: self.global_step,
            eval_step: self.eval_step,
            final_eu,
            rounds: self.round,
            demos,
            active_demos,
            ccs_size,
        })
    }

    fn finish(mut self, mode: &str) -> Result<RunOutput, CurriculumError> {
        let summary = self.summary(mode)?;
        self.metrics.summary = Some(summary);
        Ok(RunOutput { metrics: self.metrics, rounds: self.rounds, repo: self.repo, q: self.q })
    }

    /// Runs rounds until the step budget is spent.
    pub fn train(mut self) -> Result<RunOutput, CurriculumError> {
        if self.repo.is_none() {
            return Err(CurriculumError::EmptyRepository);
        }
        if self.cfg.max_steps == 0 {
            self.record_eval()?;
            return self.finish("dg_morl");
        }
        loop {
            match self.run_round() {
                Ok(r) => self.rounds.push(r),
                Err(CurriculumError::BudgetExhausted) => break,
                Err(e) => return Err(e),
            }
        }
        self.finish("dg_morl")
    }

    /// Zero-initialized epsilon-greedy baseline without demonstrations. Each
    /// episode is conditioned on a weight drawn uniformly from a small
    /// equidistant grid.
    pub fn train_baseline(mut self) -> Result<RunOutput, CurriculumError> {
        let d = self.env.spec().objectives;
        let weights = equidistant_weights(d, self.lcfg.baseline_weight_count.max(1))?;
        if self.cfg.max_steps == 0 {
            self.record_eval()?;
            return self.finish("epsilon_greedy_0init");
        }
        let horizon = self.env.spec().horizon;
        'episodes: loop {
            let w = weights[self.rng.gen_range(0..weights.len())].clone();
            self.w_c = Some(w.clone());
            let mut s = self.env.reset();
            for _ in 0..horizon {
                let a = act_epsilon(&self.q, s, &w, &self.lcfg.epsilon, self.global_step, &mut self.rng);
                match self.step(a, &w) {
                    Ok(tr) => {
                        s = tr.next_state;
                        if tr.terminal {
                            break;
                        }
                    }
                    Err(CurriculumError::BudgetExhausted) => break 'episodes,
                    Err(e) => return Err(e),
                }
            }
        }
        self.finish("epsilon_greedy_0init")
    }
}

/// DG-MORL training from an initialized repository.
pub fn train<E: Environment>(
    env: E,
    repo: DemoRepository,
    cfg: CurriculumConfig,
    lcfg: LearnerConfig,
) -> Result<RunOutput, CurriculumError> {
    Trainer::new(env, Some(repo), cfg, lcfg)?.train()
}

/// The demonstration-free baseline under the same budget accounting.
pub fn train_baseline<E: Environment>(env: E, cfg: CurriculumConfig, lcfg: LearnerConfig) -> Result<RunOutput, CurriculumError> {
    Trainer::new(env, None, cfg, lcfg)?.train_baseline()
}

impl fmt::Display for RoundRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::LockEnv;
    use crate::mo::make_weight;

    fn vv(xs: &[f64]) -> ValueVector {
        ValueVector::new(xs.to_vec()).unwrap()
    }

    fn w(xs: &[f64]) -> WeightVector {
        make_weight(xs).unwrap()
    }

    fn lock_repo(h: usize) -> (LockEnv, DemoRepository) {
        let mut env = LockEnv::new(h, 0.99).unwrap();
        let seqs = env.lock().good_sequences().to_vec();
        let repo = DemoRepository::init(&mut env, &seqs).unwrap();
        (env, repo)
    }

    fn lock_cfg(max_steps: u64) -> CurriculumConfig {
        CurriculumConfig { max_steps, eval_period: 1000, ..CurriculumConfig::default() }
    }

    #[test]
    fn candidate_weight_examples() {
        let ccs = [vv(&[1.0, 0.0]), vv(&[0.0, 1.0])];
        assert_eq!(candidate_weight(&ccs, &[], &[]).unwrap(), w(&[1.0, 0.0]));
        assert_eq!(candidate_weight(&ccs, &[vv(&[1.0, 0.0])], &[]).unwrap(), w(&[0.0, 1.0]));
        assert_eq!(candidate_weight(&[vv(&[0.5, 0.5])], &[], &[]).unwrap(), w(&[1.0, 0.0]));
        assert!(matches!(candidate_weight(&[], &[], &[]), Err(CurriculumError::EmptyCcs)));
        // all gaps closed: the first corner without a policy of its own wins the tie
        let solved = [vv(&[1.0, 0.0]), vv(&[0.0, 1.0])];
        let trained = [WeightKey::of(&w(&[1.0, 0.0]))];
        assert_eq!(candidate_weight(&ccs, &solved, &trained).unwrap(), w(&[0.5, 0.5]));
        let all: Vec<WeightKey> = [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]].iter().map(|x| WeightKey::of(&w(x))).collect();
        assert_eq!(candidate_weight(&ccs, &solved, &all).unwrap(), w(&[1.0, 0.0]));
    }

    #[test]
    fn beta_ramp() {
        let flat = BetaSchedule { start: 1.0, end: 1.0, ramp_rounds: 5 };
        assert_eq!(update_beta(&flat, 0), 1.0);
        assert_eq!(update_beta(&flat, 9), 1.0);
        let ramp = BetaSchedule { start: 0.8, end: 0.98, ramp_rounds: 9 };
        assert_eq!(update_beta(&ramp, 0), 0.8);
        assert!((update_beta(&ramp, 3) - 0.86).abs() < 1e-12);
        assert_eq!(update_beta(&ramp, 9), 0.98);
        assert_eq!(update_beta(&ramp, 40), 0.98);
    }

    #[test]
    fn pass_rules() {
        assert!(PassRule::Inclusive.passes(1.0, 1.0));
        assert!(!PassRule::Strict.passes(1.0, 1.0));
        assert!(PassRule::Strict.passes(1.0 + 1e-12, 1.0));
        assert_eq!("strict".parse::<PassRule>(), Ok(PassRule::Strict));
        assert!("loose".parse::<PassRule>().is_err());
        // half of a weak guide's utility is easy to clear
        assert!(PassRule::Strict.passes(0.3, 0.5 * 0.5));
    }

    #[test]
    fn config_validation() {
        assert!(CurriculumConfig::default().validate().is_ok());
        let bad = CurriculumConfig { rollback_span: 0, ..CurriculumConfig::default() };
        assert!(bad.validate().is_err());
        let bad = CurriculumConfig { beta: BetaSchedule { start: 0.9, end: 0.8, ramp_rounds: 1 }, ..CurriculumConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn evaluate_mixed_examples() {
        let (mut env, repo) = lock_repo(3);
        let q = QTable::new(env_spec(&env));
        let guide = repo.demos()[0].actions.clone();
        let e1 = w(&[1.0, 0.0]);
        let (u, v, _) = evaluate_mixed(&mut env, &guide, &q, 3, &e1).unwrap();
        assert_eq!(u, utility(&repo.demos()[0].value, &e1).unwrap());
        assert_eq!(v, repo.demos()[0].value);
        let (u, _, actions) = evaluate_mixed(&mut env, &guide, &q, 0, &e1).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(actions, vec![0, 0, 0]);
    }

    fn env_spec(env: &LockEnv) -> &crate::envs::MomdpSpec {
        env.spec()
    }

    #[test]
    fn trained_table_reproduces_guide_without_prefix() {
        let (mut env, repo) = lock_repo(3);
        let guide = repo.demos()[0].actions.clone();
        let (traj, _) = crate::envs::replay(&mut env, &guide).unwrap();
        let mut q = QTable::new(env.spec());
        let e1 = w(&[1.0, 0.0]);
        for _ in 0..3 {
            for t in &traj {
                q.update(t, &e1, 1.0, 0.99).unwrap();
            }
        }
        let (u, _, _) = evaluate_mixed(&mut env, &guide, &q, 0, &e1).unwrap();
        assert!((u - 0.9801).abs() < 1e-15);
    }

    #[test]
    fn mixed_rollout_replays_guide_and_counts_steps() {
        let (env, repo) = lock_repo(3);
        let mut t = Trainer::new(env, Some(repo.clone()), lock_cfg(1000), LearnerConfig::default()).unwrap();
        let guide = repo.demos()[1].clone();
        let (traj, v, steps) = t.mixed_rollout(&guide.actions, 3, &w(&[0.0, 1.0])).unwrap();
        assert_eq!(v, guide.value);
        assert_eq!(steps, 3);
        assert_eq!(traj.len(), 3);
        assert_eq!(t.global_step(), 3);
        assert_eq!(t.buffer.len(), 3);
    }

    #[test]
    fn wrong_tail_earns_nothing() {
        let (env, repo) = lock_repo(3);
        let mut t = Trainer::new(env, Some(repo.clone()), lock_cfg(1000), LearnerConfig::default()).unwrap();
        let guide = &repo.demos()[0].actions;
        // zero table: the greedy tail picks action 0, which is off the track at the end
        let (_, u, actions) = {
            let q = t.q.clone();
            evaluate_mixed(&mut t.eval_env, guide, &q, 1, &w(&[1.0, 0.0])).unwrap()
        };
        assert_eq!(u.as_slice(), &[0.0, 0.0]);
        assert_eq!(actions.len(), 3);
    }

    #[test]
    fn one_round_solves_a_corner_on_small_lock() {
        let (env, repo) = lock_repo(3);
        let mut t = Trainer::new(env, Some(repo), lock_cfg(100_000), LearnerConfig::default()).unwrap();
        let rec = t.run_round().unwrap();
        assert!(*rec.h_trace.last().unwrap() < 0);
        let h = rec.h_trace.clone();
        assert!(h.windows(2).all(|p| p[0] - p[1] == 2));
        let w_c = rec.w_c.clone();
        let agent = t.agent_values().unwrap();
        let (best, _) = max_utility_over_set(&agent, &w_c).unwrap();
        assert!((best - rec.u_threshold).abs() < 1e-12);
    }

    #[test]
    fn zero_budget_records_single_eval() {
        let (env, repo) = lock_repo(3);
        let out = train(env, repo, lock_cfg(0), LearnerConfig::default()).unwrap();
        assert_eq!(out.metrics.records.len(), 1);
        assert_eq!(out.metrics.records[0].global_step, 0);
        assert_eq!(out.metrics.records[0].eu, 0.0);
        assert!(out.rounds.is_empty());
    }

    #[test]
    fn evaluation_records_land_on_period() {
        let (env, repo) = lock_repo(3);
        let out = train(env, repo, lock_cfg(5000), LearnerConfig::default()).unwrap();
        let steps: Vec<u64> = out.metrics.records.iter().map(|r| r.global_step).collect();
        assert_eq!(steps, vec![1000, 2000, 3000, 4000, 5000]);
        let s = out.metrics.summary.as_ref().unwrap();
        assert_eq!(s.global_step, 5000);
        assert_eq!(s.final_eu, out.metrics.records.last().unwrap().eu);
    }

    #[test]
    fn metrics_round_trip_and_determinism() {
        let run = || {
            let (env, repo) = lock_repo(4);
            train(env, repo, lock_cfg(3000), LearnerConfig::default()).unwrap().metrics.to_text()
        };
        let a = run();
        assert_eq!(a, run());
        let parsed = MetricsLog::parse(&a).unwrap();
        assert_eq!(parsed.to_text(), a);
        assert!(MetricsLog::parse("eval global_step=x").is_err());
    }

    #[test]
    fn round_line_geometry_round_trip() {
        let rec = RoundRecord {
            round: 3,
            w_c: w(&[0.5, 0.5]),
            guide_id: "abc".into(),
            u_threshold: 0.25,
            beta: 1.0,
            h_trace: vec![4, 2, 0, -2],
            attempts: 4,
            global_step: 10,
            corners: vec![w(&[1.0, 0.0]), w(&[0.0, 1.0])],
            ccs: vec![vv(&[1.0, -2.0])],
        };
        let (r, corners, ccs) = RoundRecord::parse_geometry(&rec.to_line()).unwrap();
        assert_eq!(r, 3);
        assert_eq!(corners, rec.corners);
        assert_eq!(ccs, rec.ccs);
    }

    #[test]
    fn empty_repository_is_rejected() {
        let env = LockEnv::new(3, 0.99).unwrap();
        let t = Trainer::new(env, None, lock_cfg(10), LearnerConfig::default()).unwrap();
        assert!(matches!(t.train(), Err(CurriculumError::EmptyRepository)));
    }

    #[test]
    fn baseline_on_small_lock_runs_to_budget() {
        let env = LockEnv::new(3, 0.99).unwrap();
        let out = train_baseline(env, lock_cfg(2000), LearnerConfig::default()).unwrap();
        assert_eq!(out.metrics.records.len(), 2);
        assert_eq!(out.metrics.summary.unwrap().mode, "epsilon_greedy_0init");
    }
}
