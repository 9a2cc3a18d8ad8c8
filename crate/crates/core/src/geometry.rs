//! Euclidean projection onto the probability simplex and the ∞-norm
//! subdifferential.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries within this distance of the ∞-norm count as attaining it.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Tolerance on `1'x = 1` accepted by [`SimplexPoint::new`].
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A long-only portfolio: non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("simplex point needs at least one weight"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("weight {w} is not a finite non-negative number")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE * weights.len().max(1) as f64 {
            return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
        }
        Ok(SimplexPoint(weights))
    }

    /// The equal-weighted (1/N) portfolio.
    pub fn uniform(d: usize) -> Self {
        assert!(d >= 1, "simplex dimension must be positive");
        SimplexPoint(vec![1.0 / d as f64; d])
    }

    pub fn vertex(d: usize, i: usize) -> Self {
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        SimplexPoint(w)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SimplexPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Vec<f64> {
        p.0
    }
}

/// Projects `y` onto the probability simplex.
///
/// Sort-based closed form: with `y` sorted in descending order, `m` is the
/// largest index such that `y_(m) - (sum_{j<=m} y_(j) - 1)/m > 0`, and the
/// projection is `max(y_i - lambda, 0)` for the corresponding threshold.
pub fn project_simplex(y: &[f64]) -> Result<SimplexPoint> {
    if y.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("projection input has non-finite entries"));
    }

    let mut sorted = y.to_vec();
    // Stable sort, descending.
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut lambda = sorted[0] - 1.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if v - candidate > 0.0 {
            lambda = candidate;
        }
    }

    Ok(SimplexPoint(y.iter().map(|&v| (v - lambda).max(0.0)).collect()))
}

/// An element of the subdifferential of `||x||_inf`.
///
/// Returns the uniform average of `sign(x_i) e_i` over the coordinates that
/// attain the maximum absolute value. At `x = 0` every vector in the unit
/// 1-norm ball is a subgradient and the zero vector is returned.
pub fn inf_norm_subgradient(x: &[f64]) -> Vec<f64> {
    let norm = inf_norm(x);
    let mut g = vec![0.0; x.len()];
    if norm == 0.0 {
        return g;
    }
    let ties: Vec<usize> = (0..x.len())
        .filter(|&i| norm - x[i].abs() <= TIE_TOLERANCE)
        .collect();
    let w = 1.0 / ties.len() as f64;
    for i in ties {
        g[i] = x[i].signum() * w;
    }
    g
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn l1_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn l2_norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
