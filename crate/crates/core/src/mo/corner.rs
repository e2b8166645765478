use sha2::{Digest, Sha256};

use super::{check_dims, dot, make_weight, MoError, ValueVector, WeightVector, GEOMETRY_TOL};

/// Vertices of the upper utility envelope `w -> max_v w·v` over the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerWeightSet {
    pub weights: Vec<WeightVector>,
    /// Hex digest of the value set the corners were computed from.
    pub source_hash: String,
}

impl CornerWeightSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
enum Plane {
    /// `(v_i - v_j) · w = 0`
    Tie(usize, usize),
    /// `w_k = 0`
    Face(usize),
}

fn source_hash(vs: &[ValueVector]) -> String {
    let mut h = Sha256::new();
    for v in vs {
        h.update((v.dim() as u64).to_le_bytes());
        for x in v.as_slice() {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Solves a dense square system by Gaussian elimination with partial
/// pivoting. `None` when the system is (numerically) singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Corner weights of a value set with two or three objectives.
///
/// Candidate points solve `d-1` equations drawn from pairwise equal-utility
/// planes and simplex faces, together with `sum(w) = 1`. A candidate is kept
/// when it lies in the simplex and every tie plane it uses is between two
/// joint maximizers. The unit vectors are always included. Output is sorted
/// lexicographically in descending order and deduplicated at `1e-9`.
pub fn corner_weights(vs: &[ValueVector]) -> Result<CornerWeightSet, MoError> {
    let first = vs.first().ok_or(MoError::EmptyInput)?;
    let d = first.dim();
    for v in vs {
        check_dims(d, v.dim())?;
    }
    if d < 2 {
        return Err(MoError::DimensionTooSmall(d));
    }
    if d > 3 {
        return Err(MoError::UnsupportedDimension(d));
    }

    let mut uniq: Vec<&ValueVector> = Vec::new();
    for v in vs {
        if !uniq.iter().any(|u| u.as_slice() == v.as_slice()) {
            uniq.push(v);
        }
    }

    let mut planes: Vec<Plane> = Vec::new();
    for i in 0..uniq.len() {
        for j in (i + 1)..uniq.len() {
            planes.push(Plane::Tie(i, j));
        }
    }
    planes.extend((0..d).map(Plane::Face));

    let mut found: Vec<WeightVector> = (0..d).map(|k| WeightVector::unit(d, k)).collect();

    for combo in combinations(planes.len(), d - 1) {
        let chosen: Vec<Plane> = combo.iter().map(|&c| planes[c]).collect();
        if !chosen.iter().any(|p| matches!(p, Plane::Tie(..))) {
            continue;
        }
        let mut rows: Vec<Vec<f64>> = chosen
            .iter()
            .map(|p| match *p {
                Plane::Tie(i, j) => uniq[i].as_slice().iter().zip(uniq[j].as_slice()).map(|(a, b)| a - b).collect(),
                Plane::Face(k) => (0..d).map(|c| if c == k { 1.0 } else { 0.0 }).collect(),
            })
            .collect();
        rows.push(vec![1.0; d]);
        let mut rhs = vec![0.0; d];
        rhs[d - 1] = 1.0;
        let Some(x) = solve(rows, rhs) else {
            continue;
        };
        if x.iter().any(|c| !c.is_finite() || *c < -GEOMETRY_TOL) {
            continue;
        }
        let clamped: Vec<f64> = x.iter().map(|c| c.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        let normed: Vec<f64> = clamped.iter().map(|c| c / sum).collect();
        let Ok(w) = make_weight(&normed) else {
            continue;
        };

        let us: Vec<f64> = uniq.iter().map(|v| dot(v.as_slice(), w.as_slice())).collect();
        let best = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let joint = chosen.iter().all(|p| match *p {
            Plane::Tie(i, j) => us[i] >= best - GEOMETRY_TOL && us[j] >= best - GEOMETRY_TOL,
            Plane::Face(_) => true,
        });
        if !joint {
            continue;
        }
        if !found.iter().any(|f| f.max_abs_diff(&w) < GEOMETRY_TOL) {
            found.push(w);
        }
    }

    found.sort_by(|a, b| {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            match y.total_cmp(x) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });

    Ok(CornerWeightSet { weights: found, source_hash: source_hash(vs) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> ValueVector {
        ValueVector::new(xs.to_vec()).unwrap()
    }

    fn comps(set: &CornerWeightSet) -> Vec<Vec<f64>> {
        set.weights.iter().map(|w| w.as_slice().to_vec()).collect()
    }

    fn close(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12))
    }

    #[test]
    fn two_objective_examples() {
        let c = corner_weights(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        assert!(close(&comps(&c), &[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]));

        // 4 w1 = 2 (1 - w1)  =>  w1 = 1/3
        let c = corner_weights(&[v(&[4.0, 0.0]), v(&[0.0, 2.0])]).unwrap();
        assert!(close(&comps(&c), &[vec![1.0, 0.0], vec![1.0 / 3.0, 2.0 / 3.0], vec![0.0, 1.0]]));

        let c = corner_weights(&[v(&[1.0, 1.0])]).unwrap();
        assert!(close(&comps(&c), &[vec![1.0, 0.0], vec![0.0, 1.0]]));
    }

    #[test]
    fn hidden_vector_adds_no_corner() {
        // [0.4, 0.4] is below the envelope, so its crossings are not corners
        let c = corner_weights(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.4, 0.4])]).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn three_objective_triangle() {
        // Unit value vectors: the envelope max(w) has vertices at the unit
        // weights, the edge midpoints and the centroid.
        let vs = [v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])];
        let c = corner_weights(&vs).unwrap();
        assert_eq!(c.len(), 7);
        let third = 1.0 / 3.0;
        assert!(c.weights.iter().any(|w| w.as_slice().iter().all(|x| (x - third).abs() < 1e-12)));
    }

    #[test]
    fn errors() {
        assert_eq!(corner_weights(&[]), Err(MoError::EmptyInput));
        assert_eq!(corner_weights(&[v(&[1.0, 0.0, 0.0, 0.0])]), Err(MoError::UnsupportedDimension(4)));
        assert!(matches!(
            corner_weights(&[v(&[1.0, 0.0]), v(&[1.0, 0.0, 0.0])]),
            Err(MoError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_vectors_are_degenerate_not_errors() {
        let c = corner_weights(&[v(&[1.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn hash_tracks_input() {
        let a = corner_weights(&[v(&[1.0, 0.0])]).unwrap();
        let b = corner_weights(&[v(&[0.0, 1.0])]).unwrap();
        assert_ne!(a.source_hash, b.source_hash);
    }
}
