//! Demonstration generation from the exhaustive oracle.

use dgmorl_core::envs::{DstMap, EnvError};
use thiserror::Error;

use crate::config::{EnvConfig, EnvKind, Quality};
use crate::oracle::{dst_oracle, lock_oracle, OracleError, OracleResult};

#[derive(Debug, Error)]
pub enum DemoGenError {
    #[error("requested {requested} demonstrations but the oracle has {available}")]
    CountExceedsAvailable { requested: usize, available: usize },
    #[error("the lock has no {0:?} demonstrations; only optimal ones exist")]
    QualityUnsupported(Quality),
    #[error("no action leaves the start cell unchanged, so sequences cannot be padded")]
    NoWastedMove,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub fn load_map(env: &EnvConfig) -> Result<DstMap, EnvError> {
    match &env.map {
        Some(p) => DstMap::load(p),
        None => Ok(DstMap::bundled()),
    }
}

pub fn oracle_for(env: &EnvConfig, eval_weight_count: usize) -> Result<OracleResult, OracleError> {
    match env.kind {
        EnvKind::Dst => dst_oracle(&load_map(env)?, env.horizon(), env.gamma, eval_weight_count),
        EnvKind::Lock => lock_oracle(env.horizon(), env.gamma, eval_weight_count),
    }
}

/// `count` indices spread over `0..n`, both ends included.
pub fn spread_indices(n: usize, count: usize) -> Vec<usize> {
    match count {
        0 => Vec::new(),
        1 => vec![0],
        _ => (0..count).map(|i| i * (n - 1) / (count - 1)).collect(),
    }
}

/// Oracle coverage-set sequences ordered by the first objective, thinned to
/// `count` by the spread rule and padded with wasted moves for lower quality.
pub fn gen_demos(env: &EnvConfig, quality: Quality, count: Option<usize>) -> Result<Vec<Vec<usize>>, DemoGenError> {
    if env.kind == EnvKind::Lock && quality != Quality::Optimal {
        return Err(DemoGenError::QualityUnsupported(quality));
    }
    let oracle = oracle_for(env, 1)?;
    let mut entries = oracle.ccs;
    entries.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
    let n = entries.len();
    let count = count.unwrap_or(n);
    if count > n {
        return Err(DemoGenError::CountExceedsAvailable { requested: count, available: n });
    }
    let mut seqs: Vec<Vec<usize>> = spread_indices(n, count).into_iter().map(|i| entries[i].1.clone()).collect();
    let k = quality.padding();
    if k > 0 {
        let map = load_map(env)?;
        let idle = (0..4).find(|&a| map.neighbour(map.start, a) == map.start).ok_or(DemoGenError::NoWastedMove)?;
        for s in &mut seqs {
            s.splice(0..0, std::iter::repeat_n(idle, k));
        }
    }
    Ok(seqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dgmorl_core::demo::DemoRepository;
    use dgmorl_core::envs::{DstEnv, LockEnv, UP};
    use dgmorl_core::mo::{make_weight, utility};

    fn dst() -> EnvConfig {
        EnvConfig::default()
    }

    fn lock(h: usize) -> EnvConfig {
        EnvConfig { kind: EnvKind::Lock, horizon: Some(h), ..EnvConfig::default() }
    }

    #[test]
    fn spread_rule() {
        assert_eq!(spread_indices(10, 2), vec![0, 9]);
        assert_eq!(spread_indices(10, 3), vec![0, 4, 9]);
        assert_eq!(spread_indices(10, 10), (0..10).collect::<Vec<_>>());
        assert_eq!(spread_indices(10, 1), vec![0]);
    }

    #[test]
    fn lock_three_good_sequences() {
        let seqs = gen_demos(&lock(3), Quality::Optimal, Some(3)).unwrap();
        let env = LockEnv::new(3, 0.99).unwrap();
        let mut expected = env.lock().good_sequences().to_vec();
        expected.sort();
        let mut got = seqs.clone();
        got.sort();
        assert_eq!(got, expected);
        assert!(matches!(gen_demos(&lock(3), Quality::Medium, None), Err(DemoGenError::QualityUnsupported(_))));
    }

    #[test]
    fn dst_extremes_for_two() {
        let seqs = gen_demos(&dst(), Quality::Optimal, Some(2)).unwrap();
        let mut env = DstEnv::new(DstMap::bundled(), 100, 0.99).unwrap();
        let repo = DemoRepository::init(&mut env, &seqs).unwrap();
        let treasures: Vec<f64> = repo.demos().iter().map(|d| d.value[0] / 0.99f64.powi(d.actions.len() as i32 - 1)).collect();
        assert!((treasures[0] - 0.7).abs() < 1e-9, "{treasures:?}");
        assert!((treasures[1] - 23.7).abs() < 1e-9, "{treasures:?}");
        assert!(matches!(
            gen_demos(&dst(), Quality::Optimal, Some(11)),
            Err(DemoGenError::CountExceedsAvailable { requested: 11, available: 10 })
        ));
    }

    #[test]
    fn low_quality_is_padded_and_worse() {
        let good = gen_demos(&dst(), Quality::Optimal, Some(2)).unwrap();
        let low = gen_demos(&dst(), Quality::Low, Some(2)).unwrap();
        let mut env = DstEnv::new(DstMap::bundled(), 100, 0.99).unwrap();
        let g = DemoRepository::init(&mut env, &good).unwrap();
        let l = DemoRepository::init(&mut env, &low).unwrap();
        for (a, b) in g.demos().iter().zip(l.demos()) {
            assert_eq!(b.actions.len(), a.actions.len() + 6);
            assert!(b.actions[..6].iter().all(|&x| x == UP));
            for i in 1..100 {
                let x = i as f64 / 100.0;
                let w = make_weight(&[x, 1.0 - x]).unwrap();
                assert!(utility(&b.value, &w).unwrap() < utility(&a.value, &w).unwrap());
            }
        }
    }
}
