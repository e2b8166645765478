//! Multi-objective algebra: preference weights on the simplex, value vectors,
//! Pareto and convex-coverage pruning, corner weights and expected utility.
//!
//! Everything here is a pure function over immutable values, so the types can
//! be shared freely between evaluation workers.

mod corner;
mod pareto;
mod vector;

pub use corner::{corner_weights, CornerWeightSet};
pub use pareto::{ccs_prune, pareto_dominates, pareto_prune, CcsSet};
pub use vector::{format_f64, make_weight, parse_f64, ValueVector, WeightVector};

use thiserror::Error;

/// Band used for simplex sums, corner deduplication and maximizer membership.
pub const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoError {
    #[error("weight component {index} is negative ({value})")]
    NegativeComponent { index: usize, value: f64 },
    #[error("weight components sum to {sum}, expected 1")]
    SumNotOne { sum: f64 },
    #[error("need at least 2 objectives, got {0}")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("value component {index} is not finite")]
    NonFinite { index: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("dimension {0} is not supported (only 2 and 3)")]
    UnsupportedDimension(usize),
}

/// Linear scalarization `v · w`.
pub fn utility(v: &ValueVector, w: &WeightVector) -> Result<f64, MoError> {
    check_dims(v.dim(), w.dim())?;
    Ok(dot(v.as_slice(), w.as_slice()))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_dims(left: usize, right: usize) -> Result<(), MoError> {
    if left == right {
        Ok(())
    } else {
        Err(MoError::DimensionMismatch { left, right })
    }
}

/// Best scalarized value over `vs` at `w` and the index of the first maximizer.
pub fn max_utility_over_set(vs: &[ValueVector], w: &WeightVector) -> Result<(f64, usize), MoError> {
    let mut best: Option<(f64, usize)> = None;
    for (i, v) in vs.iter().enumerate() {
        let u = utility(v, w)?;
        match best {
            Some((b, _)) if u <= b => {}
            _ => best = Some((u, i)),
        }
    }
    best.ok_or(MoError::EmptyInput)
}

/// Evenly spread evaluation weights.
///
/// For two objectives this is `n` points `(i/(n-1), 1-i/(n-1))`. For three it
/// is the full simplex lattice with the smallest resolution `m` that yields at
/// least `n` points, so the returned count can exceed `n`.
pub fn equidistant_weights(d: usize, n: usize) -> Result<Vec<WeightVector>, MoError> {
    let n = n.max(2);
    match d {
        2 => (0..n)
            .map(|i| {
                let a = i as f64 / (n - 1) as f64;
                make_weight(&[a, 1.0 - a])
            })
            .collect(),
        3 => {
            let mut m = 1usize;
            while (m + 1) * (m + 2) / 2 < n {
                m += 1;
            }
            let mut out = Vec::with_capacity((m + 1) * (m + 2) / 2);
            for i in 0..=m {
                for j in 0..=(m - i) {
                    let k = m - i - j;
                    let mf = m as f64;
                    out.push(make_weight(&[i as f64 / mf, j as f64 / mf, k as f64 / mf])?);
                }
            }
            Ok(out)
        }
        0 | 1 => Err(MoError::DimensionTooSmall(d)),
        _ => Err(MoError::UnsupportedDimension(d)),
    }
}

/// Mean over `eval_weights` of the best scalarized value in `policy_values`.
pub fn expected_utility(policy_values: &[ValueVector], eval_weights: &[WeightVector]) -> Result<f64, MoError> {
    if policy_values.is_empty() || eval_weights.is_empty() {
        return Err(MoError::EmptyInput);
    }
    let mut total = 0.0;
    for w in eval_weights {
        total += max_utility_over_set(policy_values, w)?.0;
    }
    Ok(total / eval_weights.len() as f64)
}
