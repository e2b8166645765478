//! Deterministic MOMDPs behind a small environment contract.

mod dst;
mod lock;

pub use dst::{DstEnv, DstMap, Treasure, DEFAULT_DST_MAP, DOWN, LEFT, RIGHT, UP};
pub use lock::{LockEnv, LockSpec, LockTrack};

use thiserror::Error;

use crate::mo::ValueVector;

/// Dense state index, `0..spec().state_count`.
pub type State = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("action {action} out of range (environment has {count} actions)")]
    InvalidAction { action: usize, count: usize },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("lock horizon must be at least 2, got {0}")]
    HorizonTooSmall(usize),
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
}

/// Static description of a deterministic MOMDP with a point-mass start.
#[derive(Debug, Clone, PartialEq)]
pub struct MomdpSpec {
    pub id: String,
    pub state_count: usize,
    pub action_count: usize,
    pub objectives: usize,
    pub horizon: usize,
    pub gamma: f64,
}

impl MomdpSpec {
    pub fn new(
        id: impl Into<String>,
        state_count: usize,
        action_count: usize,
        objectives: usize,
        horizon: usize,
        gamma: f64,
    ) -> Result<MomdpSpec, EnvError> {
        if horizon < 1 {
            return Err(EnvError::InvalidSpec("horizon must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(EnvError::InvalidSpec(format!("discount {gamma} not in [0, 1)")));
        }
        if objectives < 2 {
            return Err(EnvError::InvalidSpec("need at least 2 objectives".into()));
        }
        if action_count < 2 {
            return Err(EnvError::InvalidSpec("need at least 2 actions".into()));
        }
        Ok(MomdpSpec { id: id.into(), state_count, action_count, objectives, horizon, gamma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: usize,
    pub next_state: State,
    pub reward: ValueVector,
    /// The episode ended on this transition.
    pub terminal: bool,
    /// The episode ended only because the step limit was hit; `next_state`
    /// is not absorbing and a learner should still bootstrap from it.
    pub truncated: bool,
    pub step_index: usize,
}

pub trait Environment: Clone + Send {
    fn spec(&self) -> &MomdpSpec;
    fn reset(&mut self) -> State;
    fn step(&mut self, action: usize) -> Result<Transition, EnvError>;
}

/// Runs one episode from reset, returning the transitions and the exact
/// discounted return `sum_t gamma^t r_t`.
pub fn rollout<E, P>(env: &mut E, mut policy: P) -> Result<(Vec<Transition>, ValueVector), EnvError>
where
    E: Environment,
    P: FnMut(State, usize) -> usize,
{
    let horizon = env.spec().horizon;
    let mut state = env.reset();
    let mut trajectory = Vec::new();
    for t in 0..horizon {
        let tr = env.step(policy(state, t))?;
        state = tr.next_state;
        let done = tr.terminal;
        trajectory.push(tr);
        if done {
            break;
        }
    }
    let ret = discounted_return(&trajectory, env.spec().gamma, env.spec().objectives);
    Ok((trajectory, ret))
}

/// Folds `sum_t gamma^t r_t` with `t` starting at zero.
pub fn discounted_return(trajectory: &[Transition], gamma: f64, objectives: usize) -> ValueVector {
    let mut acc = ValueVector::zeros(objectives);
    let mut discount = 1.0;
    for tr in trajectory {
        acc.add_scaled(&tr.reward, discount);
        discount *= gamma;
    }
    acc
}

/// Replays a fixed action sequence, stopping at termination.
pub fn replay<E: Environment>(env: &mut E, actions: &[usize]) -> Result<(Vec<Transition>, ValueVector), EnvError> {
    let horizon = env.spec().horizon;
    let mut trajectory = Vec::new();
    env.reset();
    for &a in actions.iter().take(horizon) {
        let tr = env.step(a)?;
        let done = tr.terminal;
        trajectory.push(tr);
        if done {
            break;
        }
    }
    let ret = discounted_return(&trajectory, env.spec().gamma, env.spec().objectives);
    Ok((trajectory, ret))
}
