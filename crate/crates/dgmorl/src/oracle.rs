//! Exhaustive ground truth for the bundled environments.
//!
//! Outcomes are enumerated from the map or lock definition and folded with
//! the discount directly; nothing here touches the learner or the
//! environment step functions.

use std::collections::VecDeque;
use std::fmt::Write as _;

use dgmorl_core::envs::{DstMap, LockSpec, LockTrack, UP};
use dgmorl_core::mo::{ccs_prune, corner_weights, equidistant_weights, expected_utility, format_f64, MoError, ValueVector, WeightVector};
use thiserror::Error;

pub const MAX_DST_SIDE: usize = 15;
pub const MAX_LOCK_HORIZON: usize = 12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("environment too large for the exhaustive oracle: {0}")]
    TooLargeForOracle(String),
    #[error(transparent)]
    Mo(#[from] MoError),
    #[error(transparent)]
    Env(#[from] dgmorl_core::envs::EnvError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Coverage set values with one action sequence realizing each.
    pub ccs: Vec<(ValueVector, Vec<usize>)>,
    pub corners: Vec<WeightVector>,
    pub eu: f64,
    pub eval_weight_count: usize,
}

impl OracleResult {
    fn from_outcomes(outcomes: Vec<(ValueVector, Vec<usize>)>, eval_weight_count: usize) -> Result<OracleResult, OracleError> {
        let ccs = ccs_prune(&outcomes)?;
        let values = ccs.values();
        let corners = corner_weights(&values)?.weights;
        let grid = equidistant_weights(values[0].dim(), eval_weight_count)?;
        let eu = expected_utility(&values, &grid)?;
        Ok(OracleResult { ccs: ccs.entries, corners, eu, eval_weight_count })
    }

    pub fn values(&self) -> Vec<ValueVector> {
        self.ccs.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "eu {} weights={}", format_f64(self.eu), self.eval_weight_count);
        for (v, actions) in &self.ccs {
            let acts: Vec<String> = actions.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(out, "ccs {} actions={}", v, acts.join(","));
        }
        for w in &self.corners {
            let _ = writeln!(out, "corner {w}");
        }
        out
    }
}

/// `[gamma^(L-1) * treasure, -sum_{k<L} gamma^k]` for a path of `L` steps.
fn dst_value(treasure: f64, steps: usize, gamma: f64) -> ValueVector {
    let mut discount = 1.0;
    let mut time = 0.0;
    let mut last = 1.0;
    for _ in 0..steps {
        time -= discount;
        last = discount;
        discount *= gamma;
    }
    ValueVector::new(vec![treasure * last, time]).expect("finite")
}

/// Breadth-first search over cells, treating treasure cells as terminal.
/// Every treasure's shortest path dominates its longer ones, and the
/// time-out outcome is included so the enumeration is complete.
pub fn dst_oracle(map: &DstMap, horizon: usize, gamma: f64, eval_weight_count: usize) -> Result<OracleResult, OracleError> {
    if map.rows > MAX_DST_SIDE || map.cols > MAX_DST_SIDE {
        return Err(OracleError::TooLargeForOracle(format!("{}x{} map (limit {MAX_DST_SIDE}x{MAX_DST_SIDE})", map.rows, map.cols)));
    }
    let idx = |(r, c): (usize, usize)| r * map.cols + c;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; map.rows * map.cols];
    let mut dist: Vec<Option<usize>> = vec![None; map.rows * map.cols];
    dist[idx(map.start)] = Some(0);
    let mut queue = VecDeque::from([map.start]);
    while let Some(cell) = queue.pop_front() {
        if map.treasure_at(cell.0, cell.1).is_some() {
            continue;
        }
        let d = dist[idx(cell)].expect("queued cells have a distance");
        for action in UP..=dgmorl_core::envs::RIGHT {
            let next = map.neighbour(cell, action);
            if dist[idx(next)].is_none() {
                dist[idx(next)] = Some(d + 1);
                parent[idx(next)] = Some((idx(cell), action));
                queue.push_back(next);
            }
        }
    }
    let mut outcomes = Vec::new();
    for t in &map.treasures {
        let Some(len) = dist[idx((t.row, t.col))] else { continue };
        if len > horizon {
            continue;
        }
        let mut actions = Vec::with_capacity(len);
        let mut at = idx((t.row, t.col));
        while let Some((prev, a)) = parent[at] {
            actions.push(a);
            at = prev;
        }
        actions.reverse();
        outcomes.push((dst_value(t.value, len, gamma), actions));
    }
    // wandering until the time limit without finding treasure
    let stall = if map.neighbour(map.start, UP) == map.start { UP } else { dgmorl_core::envs::DOWN };
    outcomes.push((dst_value(0.0, horizon, gamma), vec![stall; horizon]));
    OracleResult::from_outcomes(outcomes, eval_weight_count)
}

/// Depth-first enumeration of every action sequence of the lock. A derailed
/// prefix has a single outcome, so it is expanded with one continuation.
pub fn lock_oracle(horizon: usize, gamma: f64, eval_weight_count: usize) -> Result<OracleResult, OracleError> {
    if horizon > MAX_LOCK_HORIZON {
        return Err(OracleError::TooLargeForOracle(format!("lock horizon {horizon} (limit {MAX_LOCK_HORIZON})")));
    }
    let lock = LockSpec::new(horizon)?;
    let final_discount = gamma.powi(horizon as i32 - 1);
    let mut outcomes: Vec<(ValueVector, Vec<usize>)> = Vec::new();
    let mut stack = vec![(LockTrack::Root, Vec::<usize>::new(), None::<usize>)];
    while let Some((track, prefix, reward)) = stack.pop() {
        if prefix.len() == horizon {
            let r = reward.map(|i| lock.rewards[i]).unwrap_or([0.0, 0.0]);
            let v = ValueVector::new(vec![r[0] * final_discount, r[1] * final_discount]).expect("finite");
            if !outcomes.iter().any(|(o, _)| o.as_slice() == v.as_slice()) {
                outcomes.push((v, prefix));
            }
            continue;
        }
        let actions: &[usize] = if track == LockTrack::Derailed { &[0] } else { &[2, 1, 0] };
        for &a in actions {
            let (next, r) = lock.next(track, prefix.len(), a);
            let mut p = prefix.clone();
            p.push(a);
            stack.push((next, p, r));
        }
    }
    OracleResult::from_outcomes(outcomes, eval_weight_count)
}
