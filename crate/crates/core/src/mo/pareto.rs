use super::{check_dims, corner_weights, dot, MoError, ValueVector, GEOMETRY_TOL};

/// `a` weakly improves every objective of `b` and strictly improves one.
/// Exact comparison, no tolerance.
pub fn pareto_dominates(a: &ValueVector, b: &ValueVector) -> Result<bool, MoError> {
    check_dims(a.dim(), b.dim())?;
    let mut strict = false;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        if x < y {
            return Ok(false);
        }
        if x > y {
            strict = true;
        }
    }
    Ok(strict)
}

fn check_uniform<H>(vs: &[(ValueVector, H)]) -> Result<(), MoError> {
    if let Some((first, _)) = vs.first() {
        for (v, _) in vs {
            check_dims(first.dim(), v.dim())?;
        }
    }
    Ok(())
}

/// Keeps the entries no other entry dominates. Equal values collapse onto the
/// earliest one; survivors keep their input order.
pub fn pareto_prune<H: Clone>(vs: &[(ValueVector, H)]) -> Result<Vec<(ValueVector, H)>, MoError> {
    check_uniform(vs)?;
    let mut out: Vec<(ValueVector, H)> = Vec::new();
    'outer: for (i, (v, h)) in vs.iter().enumerate() {
        for (j, (other, _)) in vs.iter().enumerate() {
            if i == j {
                continue;
            }
            if pareto_dominates(other, v)? {
                continue 'outer;
            }
            if j < i && other.as_slice() == v.as_slice() {
                continue 'outer;
            }
        }
        out.push((v.clone(), h.clone()));
    }
    Ok(out)
}

/// Value vectors paired with an opaque handle, none dominated, each optimal
/// (ties allowed) at some corner weight of the set.
#[derive(Debug, Clone, PartialEq)]
pub struct CcsSet<H> {
    pub entries: Vec<(ValueVector, H)>,
}

impl<H> CcsSet<H> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<ValueVector> {
        self.entries.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn handles(&self) -> impl Iterator<Item = &H> {
        self.entries.iter().map(|(_, h)| h)
    }
}

/// Closed convex coverage set: Pareto filter, then drop entries that are not a
/// maximizer (within the geometry band) at any corner weight, repeating until
/// no entry is removed.
pub fn ccs_prune<H: Clone>(vs: &[(ValueVector, H)]) -> Result<CcsSet<H>, MoError> {
    if vs.is_empty() {
        return Err(MoError::EmptyInput);
    }
    let mut entries = pareto_prune(vs)?;
    loop {
        let values: Vec<ValueVector> = entries.iter().map(|(v, _)| v.clone()).collect();
        let corners = corner_weights(&values)?;
        let mut keep = vec![false; entries.len()];
        for w in &corners.weights {
            let us: Vec<f64> = values.iter().map(|v| dot(v.as_slice(), w.as_slice())).collect();
            let best = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (k, u) in us.iter().enumerate() {
                if *u >= best - GEOMETRY_TOL {
                    keep[k] = true;
                }
            }
        }
        if keep.iter().all(|k| *k) {
            return Ok(CcsSet { entries });
        }
        entries = entries.into_iter().zip(keep).filter_map(|(e, k)| k.then_some(e)).collect();
    }
}
