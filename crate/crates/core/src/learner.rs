//! Weight-conditioned tabular vector Q-learning with epsilon-greedy
//! exploration and a uniform replay buffer.
//!
//! Each conditioning weight gets its own dense table. Unseen entries read as
//! the zero vector.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::envs::{EnvError, Environment, MomdpSpec, State, Transition};
use crate::mo::{dot, format_f64, ValueVector, WeightVector, GEOMETRY_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("learning rate {0} not in (0, 1]")]
    InvalidAlpha(f64),
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("invalid epsilon schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

const KEY_SCALE: f64 = 1e6;

/// A conditioning weight rounded onto a `1e-6` grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightKey(Vec<i64>);

impl WeightKey {
    pub fn of(w: &WeightVector) -> WeightKey {
        WeightKey(w.as_slice().iter().map(|x| (x * KEY_SCALE).round() as i64).collect())
    }
}

impl std::fmt::Display for WeightKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|q| q.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[derive(Debug, Clone)]
struct KeyTable {
    key: WeightKey,
    weight: WeightVector,
    values: Vec<f64>,
}

/// `(state, weight key) -> [ValueVector; actions]`, stored densely per key.
#[derive(Debug, Clone)]
pub struct QTable {
    states: usize,
    actions: usize,
    objectives: usize,
    tables: Vec<KeyTable>,
    index: HashMap<WeightKey, usize>,
    version: u64,
}

impl QTable {
    pub fn new(spec: &MomdpSpec) -> QTable {
        QTable {
            states: spec.state_count,
            actions: spec.action_count,
            objectives: spec.objectives,
            tables: Vec::new(),
            index: HashMap::new(),
            version: 0,
        }
    }

    /// Bumped on every update; used to invalidate cached policy values.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    fn offset(&self, s: State, a: usize) -> usize {
        (s as usize * self.actions + a) * self.objectives
    }

    fn slot(&self, w: &WeightVector) -> Option<usize> {
        self.index.get(&WeightKey::of(w)).copied()
    }

    fn slot_or_insert(&mut self, w: &WeightVector) -> usize {
        let key = WeightKey::of(w);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.tables.len();
        self.tables.push(KeyTable { key: key.clone(), weight: w.clone(), values: vec![0.0; self.states * self.actions * self.objectives] });
        self.index.insert(key, i);
        i
    }

    /// Estimated action-value vector; zero when never updated.
    pub fn q(&self, s: State, a: usize, w: &WeightVector) -> ValueVector {
        match self.slot(w) {
            Some(i) => {
                let o = self.offset(s, a);
                ValueVector::new(self.tables[i].values[o..o + self.objectives].to_vec()).expect("finite")
            }
            None => ValueVector::zeros(self.objectives),
        }
    }

    fn greedy_in(&self, slot: Option<usize>, s: State, w: &[f64]) -> usize {
        let Some(i) = slot else {
            return 0;
        };
        let table = &self.tables[i].values;
        let mut best = 0;
        let mut best_u = f64::NEG_INFINITY;
        for a in 0..self.actions {
            let o = self.offset(s, a);
            let u = dot(&table[o..o + self.objectives], w);
            if u > best_u + GEOMETRY_TOL {
                best_u = u;
                best = a;
            }
        }
        best
    }

    /// Action maximizing `Q(s, a, w) · w`. Utilities within the geometry band
    /// count as tied and go to the lowest index, so a policy does not flip
    /// between equally good paths on rounding noise.
    pub fn greedy_action(&self, s: State, w: &WeightVector) -> usize {
        self.greedy_in(self.slot(w), s, w.as_slice())
    }

    fn update_slot(&mut self, slot: usize, tr: &Transition, alpha: f64, gamma: f64) -> f64 {
        let d = self.objectives;
        let bootstrap = !tr.terminal || tr.truncated;
        let next = if bootstrap {
            let w = self.tables[slot].weight.as_slice().to_vec();
            let a = self.greedy_in(Some(slot), tr.next_state, &w);
            Some(self.offset(tr.next_state, a))
        } else {
            None
        };
        let o = self.offset(tr.state, tr.action);
        let table = &mut self.tables[slot].values;
        let mut td_max = 0.0f64;
        for k in 0..d {
            let target = tr.reward[k] + next.map_or(0.0, |n| gamma * table[n + k]);
            let td = target - table[o + k];
            table[o + k] += alpha * td;
            td_max = td_max.max(td.abs());
        }
        self.version += 1;
        td_max
    }

    /// Vector TD step `Q <- Q + alpha (r + gamma Q(s', a*) - Q)` with `a*`
    /// greedy under `w`; episode ends that are not time-outs do not
    /// bootstrap. Returns the max-norm of the TD vector.
    pub fn update(&mut self, tr: &Transition, w: &WeightVector, alpha: f64, gamma: f64) -> Result<f64, LearnerError> {
        check_alpha(alpha)?;
        let slot = self.slot_or_insert(w);
        Ok(self.update_slot(slot, tr, alpha, gamma))
    }

    /// Conditioning weights that have received at least one update, in first
    /// use order.
    pub fn trained_weights(&self) -> Vec<WeightVector> {
        self.tables.iter().map(|t| t.weight.clone()).collect()
    }

    /// Debug dump: `state key action v_1 .. v_d` per non-zero entry.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            for s in 0..self.states {
                for a in 0..self.actions {
                    let o = self.offset(s as State, a);
                    let v = &t.values[o..o + self.objectives];
                    if v.iter().any(|x| *x != 0.0) {
                        let vals: Vec<String> = v.iter().map(|x| format_f64(*x)).collect();
                        let _ = writeln!(out, "{s} {} {a} {}", t.key, vals.join(" "));
                    }
                }
            }
        }
        out
    }
}

fn check_alpha(alpha: f64) -> Result<(), LearnerError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(LearnerError::InvalidAlpha(alpha))
    }
}

/// Learner hyperparameters shared by the curriculum and the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Replay batches consumed per environment step.
    pub updates_per_step: usize,
    pub epsilon: EpsilonSchedule,
    /// Size of the equidistant grid the baseline samples episode weights from.
    pub baseline_weight_count: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            alpha: 0.1,
            batch_size: 128,
            buffer_capacity: 100_000,
            updates_per_step: 1,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.0, anneal_steps: 50_000 },
            baseline_weight_count: 3,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        check_alpha(self.alpha)?;
        EpsilonSchedule::new(self.epsilon.start, self.epsilon.end, self.epsilon.anneal_steps)?;
        Ok(())
    }
}

/// Linear epsilon annealing from `start` to `end` over `anneal_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, anneal_steps: u64) -> Result<EpsilonSchedule, LearnerError> {
        if !(0.0 <= end && end <= start && start <= 1.0) {
            return Err(LearnerError::InvalidSchedule(format!("need 0 <= end ({end}) <= start ({start}) <= 1")));
        }
        Ok(EpsilonSchedule { start, end, anneal_steps })
    }

    pub fn epsilon(&self, global_step: u64) -> f64 {
        if self.anneal_steps == 0 {
            return self.end;
        }
        let frac = global_step as f64 / self.anneal_steps as f64;
        self.end.max(self.start - (self.start - self.end) * frac)
    }
}

/// Epsilon-greedy choice. One uniform draw decides exploration on every
/// call so the random stream does not depend on the table contents.
pub fn act_epsilon<R: Rng>(
    q: &QTable,
    s: State,
    w: &WeightVector,
    schedule: &EpsilonSchedule,
    global_step: u64,
    rng: &mut R,
) -> usize {
    let explore = rng.gen::<f64>() < schedule.epsilon(global_step);
    if explore {
        rng.gen_range(0..q.actions)
    } else {
        q.greedy_action(s, w)
    }
}

/// Bounded FIFO of transitions tagged with the weight they were collected
/// under.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<(Transition, WeightVector)>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer { capacity: capacity.max(1), items: VecDeque::new() }
    }

    pub fn push(&mut self, tr: Transition, w: WeightVector) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back((tr, w));
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// Samples `batch` transitions uniformly (with replacement only when the
/// buffer is smaller than the batch) and updates each under its own
/// conditioning weight and, when different, under `w` as well. Returns the
/// mean TD magnitude over all updates applied.
pub fn train_batch<R: Rng>(
    q: &mut QTable,
    buffer: &ReplayBuffer,
    w: &WeightVector,
    alpha: f64,
    gamma: f64,
    batch: usize,
    rng: &mut R,
) -> Result<f64, LearnerError> {
    check_alpha(alpha)?;
    if batch == 0 {
        return Ok(0.0);
    }
    if buffer.is_empty() {
        return Err(LearnerError::EmptyBuffer);
    }
    let picks: Vec<usize> = if buffer.len() >= batch {
        rand::seq::index::sample(rng, buffer.len(), batch).into_vec()
    } else {
        (0..batch).map(|_| rng.gen_range(0..buffer.len())).collect()
    };
    let current = q.slot_or_insert(w);
    let mut total = 0.0;
    let mut count = 0usize;
    for i in picks {
        let (tr, tag) = &buffer.items[i];
        let own = q.slot_or_insert(tag);
        total += q.update_slot(own, tr, alpha, gamma);
        count += 1;
        if own != current {
            total += q.update_slot(current, tr, alpha, gamma);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Greedy (epsilon = 0) rollout conditioned on `w`. Returns the exact return
/// and the number of environment steps taken.
pub fn policy_value<E: Environment>(q: &QTable, env: &mut E, w: &WeightVector) -> Result<(ValueVector, usize), LearnerError> {
    let slot = q.slot(w);
    let weights = w.as_slice();
    let (traj, v) = crate::envs::rollout(env, |s, _| q.greedy_in(slot, s, weights))?;
    Ok((v, traj.len()))
}

/// Caches greedy policy values per `(table version, weight key)`.
#[derive(Debug, Default, Clone)]
pub struct PolicyEvaluator {
    cache: HashMap<WeightKey, (u64, ValueVector)>,
    /// Environment steps spent on evaluation rollouts.
    pub eval_steps: u64,
}

impl PolicyEvaluator {
    pub fn new() -> PolicyEvaluator {
        PolicyEvaluator::default()
    }

    /// One value per conditioning weight, in input order.
    pub fn policy_set_values<E: Environment>(
        &mut self,
        q: &QTable,
        env: &mut E,
        weights: &[WeightVector],
    ) -> Result<Vec<ValueVector>, LearnerError> {
        let mut out = Vec::with_capacity(weights.len());
        for w in weights {
            let key = WeightKey::of(w);
            match self.cache.get(&key) {
                Some((ver, v)) if *ver == q.version() => out.push(v.clone()),
                _ => {
                    let (v, steps) = policy_value(q, env, w)?;
                    self.eval_steps += steps as u64;
                    self.cache.insert(key, (q.version(), v.clone()));
                    out.push(v);
                }
            }
        }
        Ok(out)
    }
}
