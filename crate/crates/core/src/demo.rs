//! The guide-policy repository: prior demonstrations plus trajectories the
//! agent found itself, kept as replayable action sequences.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::envs::{replay, EnvError, Environment};
use crate::mo::{ccs_prune, format_f64, parse_f64, utility, CcsSet, MoError, ValueVector, WeightVector, GEOMETRY_TOL};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mo(#[from] MoError),
    #[error("demonstration has no actions")]
    EmptyActionList,
    #[error("need at least one demonstration")]
    TooFewDemos,
    #[error("repository has no active demonstrations")]
    EmptyRepository,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("stored value of demonstration {id} does not match its replay")]
    ValueMismatch { id: String },
    #[error("demonstration recorded for {found}, environment is {expected}")]
    EnvMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Prior,
    SelfEvolved,
}

impl Origin {
    fn as_str(self) -> &'static str {
        match self {
            Origin::Prior => "prior",
            Origin::SelfEvolved => "self_evolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub id: String,
    pub env_id: String,
    pub actions: Vec<usize>,
    pub value: ValueVector,
    pub origin: Origin,
    pub created_round: usize,
}

/// Stable digest of an action sequence within one environment.
pub fn demo_id(env_id: &str, actions: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update(env_id.as_bytes());
    h.update([0u8]);
    for a in actions {
        h.update((*a as u32).to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Replays `actions` from reset and returns the exact discounted return.
pub fn evaluate_demo<E: Environment>(env: &mut E, actions: &[usize]) -> Result<ValueVector, DemoError> {
    if actions.is_empty() {
        return Err(DemoError::EmptyActionList);
    }
    let (_, v) = replay(env, actions)?;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRepository {
    env_id: String,
    gamma: f64,
    objectives: usize,
    demos: Vec<Demonstration>,
    active: Vec<bool>,
    ccs: CcsSet<usize>,
}

impl DemoRepository {
    /// Evaluates the prior demonstrations and builds their coverage set.
    /// Sequences repeating an earlier one are dropped.
    pub fn init<E: Environment>(env: &mut E, sequences: &[Vec<usize>]) -> Result<DemoRepository, DemoError> {
        if sequences.is_empty() {
            return Err(DemoError::TooFewDemos);
        }
        let spec = env.spec().clone();
        let mut demos: Vec<Demonstration> = Vec::new();
        for actions in sequences {
            let value = evaluate_demo(env, actions)?;
            let id = demo_id(&spec.id, actions);
            if demos.iter().any(|d| d.id == id) {
                continue;
            }
            demos.push(Demonstration { id, env_id: spec.id.clone(), actions: actions.clone(), value, origin: Origin::Prior, created_round: 0 });
        }
        let mut repo = DemoRepository {
            env_id: spec.id,
            gamma: spec.gamma,
            objectives: spec.objectives,
            active: vec![true; demos.len()],
            demos,
            ccs: CcsSet { entries: Vec::new() },
        };
        repo.refresh_ccs()?;
        repo.prune();
        Ok(repo)
    }

    fn refresh_ccs(&mut self) -> Result<(), DemoError> {
        let tagged: Vec<(ValueVector, usize)> = self.demos.iter().enumerate().map(|(i, d)| (d.value.clone(), i)).collect();
        self.ccs = ccs_prune(&tagged)?;
        Ok(())
    }

    fn on_ccs(&self, v: &ValueVector) -> bool {
        self.ccs.entries.iter().any(|(c, _)| c.as_slice() == v.as_slice())
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn demos(&self) -> &[Demonstration] {
        &self.demos
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.active[index]
    }

    pub fn active_demos(&self) -> impl Iterator<Item = &Demonstration> {
        self.demos.iter().zip(&self.active).filter_map(|(d, a)| a.then_some(d))
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn active_values(&self) -> Vec<ValueVector> {
        self.active_demos().map(|d| d.value.clone()).collect()
    }

    /// Coverage set over all stored values; handles index `demos()`.
    pub fn ccs(&self) -> &CcsSet<usize> {
        &self.ccs
    }

    /// Active demonstration with the largest improvement `u(v, w) - u_e`.
    /// Improvements within the geometry band count as ties and go to the
    /// earliest inserted demonstration.
    pub fn select_guide(&self, w: &WeightVector, u_e: f64) -> Result<&Demonstration, DemoError> {
        let mut best: Option<(f64, &Demonstration)> = None;
        for d in self.active_demos() {
            let gain = utility(&d.value, w)? - u_e;
            match best {
                Some((b, _)) if gain <= b + GEOMETRY_TOL => {}
                _ => best = Some((gain, d)),
            }
        }
        best.map(|(_, d)| d).ok_or(DemoError::EmptyRepository)
    }

    /// Stores a self-generated trajectory. Returns whether its value sits on
    /// the updated coverage set; off-set trajectories are kept inactive.
    /// Existing demonstrations are only deactivated by [`prune`](Self::prune).
    pub fn absorb<E: Environment>(
        &mut self,
        env: &mut E,
        actions: &[usize],
        value: ValueVector,
        round: usize,
    ) -> Result<bool, DemoError> {
        if actions.is_empty() {
            return Err(DemoError::EmptyActionList);
        }
        debug_assert!(evaluate_demo(env, actions).map(|v| v.bit_eq(&value)).unwrap_or(false));
        let id = demo_id(&self.env_id, actions);
        if self.demos.iter().any(|d| d.id == id) {
            return Ok(false);
        }
        self.demos.push(Demonstration {
            id,
            env_id: self.env_id.clone(),
            actions: actions.to_vec(),
            value: value.clone(),
            origin: Origin::SelfEvolved,
            created_round: round,
        });
        self.refresh_ccs()?;
        let on = self.on_ccs(&value);
        self.active.push(on);
        Ok(on)
    }

    /// Deactivates demonstrations whose values left the coverage set.
    /// Records are never deleted. Returns how many were deactivated.
    pub fn prune(&mut self) -> usize {
        let mut count = 0;
        for i in 0..self.demos.len() {
            if self.active[i] && !self.on_ccs(&self.demos[i].value) {
                self.active[i] = false;
                count += 1;
            }
        }
        count
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# dgmorl demonstrations v1\n");
        for (d, active) in self.demos.iter().zip(&self.active) {
            let _ = writeln!(
                out,
                "demo env={} gamma={} d={} origin={} round={} active={}",
                d.env_id,
                format_f64(self.gamma),
                self.objectives,
                d.origin.as_str(),
                d.created_round,
                u8::from(*active)
            );
            let acts: Vec<String> = d.actions.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(out, "actions {}", acts.join(" "));
            let _ = writeln!(out, "value {}", d.value);
        }
        out
    }

    /// Parses the text form. With an environment, every stored value is
    /// re-derived by replay and must match bit for bit.
    pub fn from_text<E: Environment>(text: &str, env: Option<&mut E>) -> Result<DemoRepository, DemoError> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if lines.is_empty() || lines.len() % 3 != 0 {
            return Err(DemoError::Format { line: lines.last().map_or(1, |l| l.0), msg: "expected demo/actions/value triples".into() });
        }
        let mut demos = Vec::new();
        let mut active = Vec::new();
        let mut header_env: Option<(String, f64, usize)> = None;
        for block in lines.chunks(3) {
            let (hl, header) = block[0];
            let fields = parse_header(hl, header)?;
            let get = |k: &str| -> Result<&str, DemoError> {
                fields.iter().find(|(key, _)| *key == k).map(|(_, v)| *v).ok_or(DemoError::Format { line: hl, msg: format!("missing `{k}`") })
            };
            let env_id = get("env")?.to_string();
            let gamma = parse_f64(get("gamma")?).ok_or(DemoError::Format { line: hl, msg: "bad gamma".into() })?;
            let d: usize = get("d")?.parse().map_err(|_| DemoError::Format { line: hl, msg: "bad d".into() })?;
            let origin = match get("origin")? {
                "prior" => Origin::Prior,
                "self_evolved" => Origin::SelfEvolved,
                o => return Err(DemoError::Format { line: hl, msg: format!("unknown origin `{o}`") }),
            };
            let round: usize = get("round")?.parse().map_err(|_| DemoError::Format { line: hl, msg: "bad round".into() })?;
            let is_active = match fields.iter().find(|(k, _)| *k == "active").map(|(_, v)| *v) {
                None | Some("1") => true,
                Some("0") => false,
                Some(x) => return Err(DemoError::Format { line: hl, msg: format!("bad active flag `{x}`") }),
            };
            match &header_env {
                None => header_env = Some((env_id.clone(), gamma, d)),
                Some((e, g, dd)) if *e == env_id && g.to_bits() == gamma.to_bits() && *dd == d => {}
                Some(_) => return Err(DemoError::Format { line: hl, msg: "mixed environments in one file".into() }),
            }

            let (al, acts) = block[1];
            let acts = acts.strip_prefix("actions").ok_or(DemoError::Format { line: al, msg: "expected `actions`".into() })?;
            let actions: Vec<usize> = acts
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| DemoError::Format { line: al, msg: format!("bad action `{t}`") }))
                .collect::<Result<_, _>>()?;
            if actions.is_empty() {
                return Err(DemoError::EmptyActionList);
            }

            let (vl, vals) = block[2];
            let vals = vals.strip_prefix("value").ok_or(DemoError::Format { line: vl, msg: "expected `value`".into() })?;
            let comps: Vec<f64> = vals
                .split_whitespace()
                .map(|t| parse_f64(t).ok_or(DemoError::Format { line: vl, msg: format!("bad number `{t}`") }))
                .collect::<Result<_, _>>()?;
            if comps.len() != d {
                return Err(DemoError::Format { line: vl, msg: format!("expected {d} components, got {}", comps.len()) });
            }
            let value = ValueVector::new(comps)?;
            let id = demo_id(&env_id, &actions);
            if demos.iter().any(|x: &Demonstration| x.id == id) {
                return Err(DemoError::Format { line: hl, msg: format!("duplicate demonstration {id}") });
            }
            demos.push(Demonstration { id, env_id, actions, value, origin, created_round: round });
            active.push(is_active);
        }
        let (env_id, gamma, objectives) = header_env.expect("at least one block");

        if let Some(env) = env {
            let spec = env.spec().clone();
            if spec.id != env_id {
                return Err(DemoError::EnvMismatch { expected: spec.id, found: env_id });
            }
            for d in &demos {
                if !evaluate_demo(env, &d.actions)?.bit_eq(&d.value) {
                    return Err(DemoError::ValueMismatch { id: d.id.clone() });
                }
            }
        }

        let mut repo = DemoRepository { env_id, gamma, objectives, demos, active, ccs: CcsSet { entries: Vec::new() } };
        repo.refresh_ccs()?;
        Ok(repo)
    }

    pub fn save(&self, path: &Path) -> Result<(), DemoError> {
        std::fs::write(path, self.to_text()).map_err(|source| DemoError::Io { path: path.display().to_string(), source })
    }

    pub fn load<E: Environment>(path: &Path, env: Option<&mut E>) -> Result<DemoRepository, DemoError> {
        let text = std::fs::read_to_string(path).map_err(|source| DemoError::Io { path: path.display().to_string(), source })?;
        DemoRepository::from_text(&text, env)
    }
}

fn parse_header(line: usize, header: &str) -> Result<Vec<(&str, &str)>, DemoError> {
    let mut toks = header.split_whitespace();
    if toks.next() != Some("demo") {
        return Err(DemoError::Format { line, msg: "expected `demo` header".into() });
    }
    toks.map(|t| t.split_once('=').ok_or(DemoError::Format { line, msg: format!("bad field `{t}`") })).collect()
}

/// Reads the action sequences from a demonstration file without building a
/// repository, for use as prior demonstrations.
pub fn load_sequences(path: &Path) -> Result<Vec<Vec<usize>>, DemoError> {
    let text = std::fs::read_to_string(path).map_err(|source| DemoError::Io { path: path.display().to_string(), source })?;
    let repo = DemoRepository::from_text::<crate::envs::LockEnv>(&text, None)?;
    Ok(repo.demos.into_iter().map(|d| d.actions).collect())
}
