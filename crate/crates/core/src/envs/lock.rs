use super::{EnvError, Environment, MomdpSpec, State, Transition};
use crate::mo::ValueVector;

/// Where the agent is in the lock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LockTrack {
    Root,
    Objective1,
    Objective2,
    /// Absorbing zero-reward chain after any wrong action.
    Derailed,
    /// Reached by the balancing action at the last step.
    Balanced,
}

const TRACKS: [LockTrack; 5] =
    [LockTrack::Root, LockTrack::Objective1, LockTrack::Objective2, LockTrack::Derailed, LockTrack::Balanced];

/// Multi-objective combination lock with three rewarded action sequences.
///
/// The correct action changes with depth: at depth `t` the first-objective
/// track continues with `(t + 1) % 3`, the second-objective track with
/// `(t + 2) % 3`. On the first-objective track at the final step, action
/// `(H - 1) % 3` switches to the balanced outcome instead of derailing.
/// Action 0 derails at the root, so an all-zero policy earns nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct LockSpec {
    pub horizon: usize,
    pub objective1_actions: Vec<usize>,
    pub objective2_actions: Vec<usize>,
    pub balance_action: usize,
    pub rewards: [[f64; 2]; 3],
}

impl LockSpec {
    pub fn new(horizon: usize) -> Result<LockSpec, EnvError> {
        if horizon < 2 {
            return Err(EnvError::HorizonTooSmall(horizon));
        }
        Ok(LockSpec {
            horizon,
            objective1_actions: (0..horizon).map(|t| (t + 1) % 3).collect(),
            objective2_actions: (0..horizon).map(|t| (t + 2) % 3).collect(),
            balance_action: (horizon - 1) % 3,
            rewards: [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]],
        })
    }

    /// The three rewarded sequences: first objective, second objective,
    /// balanced.
    pub fn good_sequences(&self) -> [Vec<usize>; 3] {
        let mut balanced = self.objective1_actions.clone();
        balanced[self.horizon - 1] = self.balance_action;
        [self.objective1_actions.clone(), self.objective2_actions.clone(), balanced]
    }

    /// Pure transition function: `(track, depth, action) -> (next track, reward index)`.
    pub fn next(&self, track: LockTrack, depth: usize, action: usize) -> (LockTrack, Option<usize>) {
        let last = depth + 1 == self.horizon;
        let o1 = self.objective1_actions[depth];
        let o2 = self.objective2_actions[depth];
        let next = match track {
            LockTrack::Root if action == o1 => LockTrack::Objective1,
            LockTrack::Root if action == o2 => LockTrack::Objective2,
            LockTrack::Objective1 if action == o1 => LockTrack::Objective1,
            LockTrack::Objective1 if last && action == self.balance_action => LockTrack::Balanced,
            LockTrack::Objective2 if action == o2 => LockTrack::Objective2,
            _ => LockTrack::Derailed,
        };
        let reward = if !last {
            None
        } else {
            match next {
                LockTrack::Objective1 => Some(0),
                LockTrack::Objective2 => Some(1),
                LockTrack::Balanced => Some(2),
                _ => None,
            }
        };
        (next, reward)
    }
}

#[derive(Debug, Clone)]
pub struct LockEnv {
    lock: LockSpec,
    spec: MomdpSpec,
    track: LockTrack,
    depth: usize,
}

impl LockEnv {
    pub fn new(horizon: usize, gamma: f64) -> Result<LockEnv, EnvError> {
        let lock = LockSpec::new(horizon)?;
        let spec = MomdpSpec::new(format!("lock:h{horizon}"), TRACKS.len() * (horizon + 1), 3, 2, horizon, gamma)?;
        Ok(LockEnv { lock, spec, track: LockTrack::Root, depth: 0 })
    }

    pub fn lock(&self) -> &LockSpec {
        &self.lock
    }

    pub fn encode(&self, track: LockTrack, depth: usize) -> State {
        let t = TRACKS.iter().position(|x| *x == track).expect("known track");
        (depth * TRACKS.len() + t) as State
    }

    pub fn decode(&self, s: State) -> (LockTrack, usize) {
        let s = s as usize;
        (TRACKS[s % TRACKS.len()], s / TRACKS.len())
    }
}

impl Environment for LockEnv {
    fn spec(&self) -> &MomdpSpec {
        &self.spec
    }

    fn reset(&mut self) -> State {
        self.track = LockTrack::Root;
        self.depth = 0;
        self.encode(self.track, 0)
    }

    fn step(&mut self, action: usize) -> Result<Transition, EnvError> {
        if self.depth >= self.lock.horizon {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= 3 {
            return Err(EnvError::InvalidAction { action, count: 3 });
        }
        let state = self.encode(self.track, self.depth);
        let (next, reward) = self.lock.next(self.track, self.depth, action);
        let step_index = self.depth;
        self.track = next;
        self.depth += 1;
        let r = reward.map(|i| self.lock.rewards[i]).unwrap_or([0.0, 0.0]);
        Ok(Transition {
            state,
            action,
            next_state: self.encode(next, self.depth),
            reward: ValueVector::new(r.to_vec()).expect("finite reward"),
            terminal: self.depth == self.lock.horizon,
            truncated: false,
            step_index,
        })
    }
}
