//! Sampled upper bounds on the smoothness constants of `h`.
//!
//! Global maxima over `[q_lo, q_hi] x I x simplex` have no closed form, so the
//! bounds are maxima over a low-discrepancy point set (plus the corners),
//! inflated by a safety factor.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::l2_norm;
use crate::objective::MinimaxObjective;

pub const DEFAULT_SAMPLES: usize = 64;
pub const INFLATION: f64 = 1.25;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    /// Bound on `||grad_z h||`.
    pub k1: f64,
    /// Bound on the spectral norm of `grad_z^2 h`.
    pub k2: f64,
    /// Bound on `||d/dq grad_z h||`.
    pub k3: f64,
    /// Curvature of the radius at its mode, when defined.
    pub k4: Option<f64>,
    pub lambda_m: Option<f64>,
    /// Largest sampled `d^2 h / dq^2` (negative means strictly concave in `q`
    /// on the sample).
    pub h_qq_max: Option<f64>,
    pub samples: usize,
    pub inflation: f64,
}

impl SmoothnessConstants {
    pub fn concave_in_q(&self) -> Option<bool> {
        self.h_qq_max.map(|v| v < 0.0)
    }
}

/// A sampled point `(q, x, aux)` of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPoint {
    pub q: f64,
    pub x: Vec<f64>,
    pub aux: f64,
}

/// Largest root of `phi^(n+1) = phi + 1`, the generator of the additive
/// recurrence with the best known spread in `n` dimensions.
fn generalized_golden(n: usize) -> f64 {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (n as f64 + 1.0));
    }
    phi
}

/// `samples` low-discrepancy points plus simplex vertices and the
/// barycenter at the corners of the `(q, aux)` box.
pub fn sample_points(objective: &dyn MinimaxObjective, samples: usize, seed: u64) -> Vec<DomainPoint> {
    let d = objective.dim();
    let qi = objective.q_interval();
    let ai = objective.aux_domain();
    let dims = d + 2;
    let phi = generalized_golden(dims);
    let steps: Vec<f64> = (1..=dims).map(|j| phi.powi(-(j as i32)).fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();

    let mut points = Vec::with_capacity(samples + 4 * (d + 1));
    for n in 1..=samples {
        let u: Vec<f64> = (0..dims)
            .map(|j| (offset[j] + n as f64 * steps[j]).fract())
            .collect();
        // Exponential spacings give a uniform point on the simplex.
        let e: Vec<f64> = u[..d].iter().map(|v| -(v.max(1e-300)).ln()).collect();
        let total: f64 = e.iter().sum();
        points.push(DomainPoint {
            x: e.iter().map(|v| v / total).collect(),
            aux: ai.lo + u[d] * ai.width(),
            q: qi.lo + u[d + 1] * qi.width(),
        });
    }
    let mut corners: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        })
        .collect();
    corners.push(vec![1.0 / d as f64; d]);
    for x in corners {
        for q in [qi.lo, qi.hi] {
            for aux in [ai.lo, ai.hi] {
                points.push(DomainPoint { q, x: x.clone(), aux });
            }
        }
    }
    points
}

fn flatten(g: (Vec<f64>, f64)) -> Vec<f64> {
    let (mut v, a) = g;
    v.push(a);
    v
}

fn gradient_at(objective: &dyn MinimaxObjective, q: f64, z: &[f64]) -> Vec<f64> {
    let d = z.len() - 1;
    flatten(objective.h_gradient(q, &z[..d], z[d]))
}

/// Spectral norm of the symmetrized central-difference Hessian in `z`.
fn hessian_norm(objective: &dyn MinimaxObjective, q: f64, z: &[f64]) -> f64 {
    let n = z.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = z.to_vec();
        let mut minus = z.to_vec();
        plus[j] += FD_STEP;
        minus[j] -= FD_STEP;
        let gp = gradient_at(objective, q, &plus);
        let gm = gradient_at(objective, q, &minus);
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * FD_STEP);
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.amax()
}

/// `||d/dq grad_z h||` by central differences, one-sided at the ends of
/// `[0, 1]`.
fn mixed_norm(objective: &dyn MinimaxObjective, q: f64, z: &[f64]) -> f64 {
    let lo = (q - FD_STEP).max(0.0);
    let hi = (q + FD_STEP).min(1.0);
    let gp = gradient_at(objective, hi, z);
    let gm = gradient_at(objective, lo, z);
    let diff: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (hi - lo)).collect();
    l2_norm(&diff)
}

pub fn estimate_constants(objective: &dyn MinimaxObjective, samples: usize, seed: u64) -> SmoothnessConstants {
    estimate_constants_with(objective, samples, seed, INFLATION)
}

pub fn estimate_constants_with(
    objective: &dyn MinimaxObjective,
    samples: usize,
    seed: u64,
    inflation: f64,
) -> SmoothnessConstants {
    let points = sample_points(objective, samples.max(1), seed);
    let (mut k1, mut k2, mut k3) = (0.0f64, 0.0f64, 0.0f64);
    let mut h_qq_max: Option<f64> = None;
    for p in &points {
        let mut z = p.x.clone();
        z.push(p.aux);
        k1 = k1.max(l2_norm(&gradient_at(objective, p.q, &z)));
        k2 = k2.max(hessian_norm(objective, p.q, &z));
        k3 = k3.max(mixed_norm(objective, p.q, &z));
        if let Some(v) = objective.h_qq(p.q, &p.x, p.aux) {
            h_qq_max = Some(h_qq_max.map_or(v, |m| m.max(v)));
        }
    }
    SmoothnessConstants {
        k1: k1 * inflation,
        k2: k2 * inflation,
        k3: k3 * inflation,
        k4: objective.ambiguity().k4_constant(objective.dim()).ok(),
        lambda_m: objective.lambda_m(),
        h_qq_max,
        samples: points.len(),
        inflation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::AmbiguitySpec;
    use crate::meanvar::{MeanVarProblem, MomentSpec};

    #[test]
    fn points_are_feasible() {
        let n = MomentSpec::from_rows(vec![0.03, 0.06, 0.09], vec![
            vec![0.001, 0.0, 0.0],
            vec![0.0, 0.002, 0.0],
            vec![0.0, 0.0, 0.003],
        ])
        .unwrap();
        let p = MeanVarProblem::new(0.1, n.clone(), n, AmbiguitySpec::new(0.2, 0.05, 0.1, 10.0).unwrap()).unwrap();
        for pt in sample_points(&p, 50, 3) {
            assert!((pt.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(pt.x.iter().all(|v| *v >= 0.0));
            assert!(p.aux_interval().contains(pt.aux));
            assert!(p.q_interval().contains(pt.q));
        }
    }

    #[test]
    fn golden_root() {
        let phi = generalized_golden(1);
        assert!((phi - 1.618_033_988_749_895).abs() < 1e-12);
    }
}
