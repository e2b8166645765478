use std::fmt;
use std::ops::Index;

use super::{MoError, GEOMETRY_TOL};

/// A preference over objectives: non-negative components summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

/// Discounted return per objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector(Vec<f64>);

/// Validates a point on the simplex. Sums off by less than the geometry band
/// are renormalized; larger deviations are rejected.
pub fn make_weight(components: &[f64]) -> Result<WeightVector, MoError> {
    if components.len() < 2 {
        return Err(MoError::DimensionTooSmall(components.len()));
    }
    for (index, &value) in components.iter().enumerate() {
        if !value.is_finite() {
            return Err(MoError::NonFinite { index });
        }
        if value < 0.0 {
            return Err(MoError::NegativeComponent { index, value });
        }
    }
    let sum: f64 = components.iter().sum();
    if (sum - 1.0).abs() >= GEOMETRY_TOL {
        return Err(MoError::SumNotOne { sum });
    }
    let comps = if sum == 1.0 {
        components.to_vec()
    } else {
        components.iter().map(|c| c / sum).collect()
    };
    Ok(WeightVector(comps))
}

impl WeightVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Unit preference for objective `k`.
    pub fn unit(d: usize, k: usize) -> WeightVector {
        let mut c = vec![0.0; d];
        c[k] = 1.0;
        WeightVector(c)
    }

    /// Equal preference over all `d` objectives.
    pub fn uniform(d: usize) -> WeightVector {
        WeightVector(vec![1.0 / d as f64; d])
    }

    pub(crate) fn max_abs_diff(&self, other: &WeightVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl ValueVector {
    pub fn new(components: Vec<f64>) -> Result<ValueVector, MoError> {
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(MoError::NonFinite { index });
        }
        Ok(ValueVector(components))
    }

    pub fn zeros(d: usize) -> ValueVector {
        ValueVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `self += scale * other`, used when folding discounted rewards.
    pub fn add_scaled(&mut self, other: &ValueVector, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    /// Exact bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &ValueVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Index<usize> for ValueVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn write_components(f: &mut fmt::Formatter<'_>, c: &[f64]) -> fmt::Result {
    for (i, x) in c.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        f.write_str(&format_f64(*x))?;
    }
    Ok(())
}

impl fmt::Display for ValueVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_components(f, &self.0)
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_components(f, &self.0)
    }
}

/// Decimal text with 17 significant digits; parses back to the same bits.
pub fn format_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}
