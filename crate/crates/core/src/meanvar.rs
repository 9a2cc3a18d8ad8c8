//! Robust Mean-Variance objective.
//!
//! With `psi(y) = (y - a)^2 - gamma y` the worst-case disutility reduces to
//! `min_{x, a} max_q h(q, x, a)` where
//!
//! ```text
//! h(q, x, a) = (1 - q) E_N[psi(x'R)] + q V(q, x, a)
//! V(q, x, a) = (r(q) ||x|| + S(x, a))^2 - a gamma - gamma^2 / 4
//! S(x, a)    = sqrt(x' Sigma_S x + (x' mu_S - (2a + gamma) / 2)^2)
//! ```
//!
//! Everything here depends on the two regimes only through their first two
//! moments; no samples are touched.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ambiguity::AmbiguitySpec;
use crate::error::{Error, Result};
use crate::geometry::{dot, l2_norm};
use crate::interval::Interval;
use crate::objective::{MinimaxObjective, Subgradient};
use crate::qsearch::{QGrid, WorstCase};

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const PD_RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMoments {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

/// Mean vector and positive-definite covariance of one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMoments", into = "RawMoments")]
pub struct MomentSpec {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl MomentSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("moment spec needs at least one asset"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::invalid(format!(
                "covariance is {}x{}, expected {d}x{d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("moments contain non-finite entries"));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(cov.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        if !(max > 0.0 && min > PD_RELATIVE_TOLERANCE * max) {
            return Err(Error::invalid(format!(
                "covariance is not positive definite (eigenvalues in [{min:e}, {max:e}])"
            )));
        }
        Ok(MomentSpec { mean, cov })
    }

    pub fn from_rows(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.iter().any(|row| row.len() != d) || cov.len() != d {
            return Err(Error::invalid(format!("covariance must be {d}x{d}")));
        }
        let flat: Vec<f64> = cov.into_iter().flatten().collect();
        MomentSpec::new(DVector::from_vec(mean), DMatrix::from_row_slice(d, d, &flat))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `E ||R||^2 = trace(Sigma) + ||mu||^2`.
    pub fn second_moment_norm(&self) -> f64 {
        self.cov.trace() + self.mean.norm_squared()
    }

    /// `Sigma + mu mu'`.
    pub fn raw_second_moment(&self) -> DMatrix<f64> {
        &self.cov + &self.mean * self.mean.transpose()
    }

    /// Scales the covariance by `factor`, leaving the mean untouched.
    pub fn scale_cov(&self, factor: f64) -> Result<Self> {
        MomentSpec::new(self.mean.clone(), &self.cov * factor)
    }
}

impl TryFrom<RawMoments> for MomentSpec {
    type Error = Error;

    fn try_from(raw: RawMoments) -> Result<Self> {
        MomentSpec::from_rows(raw.mean, raw.cov)
    }
}

impl From<MomentSpec> for RawMoments {
    fn from(m: MomentSpec) -> Self {
        let d = m.dim();
        RawMoments {
            mean: m.mean.iter().cloned().collect(),
            cov: (0..d).map(|i| (0..d).map(|j| m.cov[(i, j)]).collect()).collect(),
        }
    }
}

/// `psi_{a,gamma}(y) = (y - a)^2 - gamma y`.
pub fn psi(y: f64, a: f64, gamma: f64) -> f64 {
    (y - a) * (y - a) - gamma * y
}

fn quad(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += m[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| (0..d).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// `E[psi(x'R)] = x' Sigma x + (x' mu - a)^2 - gamma x' mu` for a regime with
/// the given moments.
pub fn expected_psi(moments: &MomentSpec, x: &[f64], a: f64, gamma: f64) -> f64 {
    let m = dot(moments.mean.as_slice(), x);
    quad(&moments.cov, x) + (m - a) * (m - a) - gamma * m
}

/// The robust Mean-Variance problem.
#[derive(Debug, Clone)]
pub struct MeanVarProblem {
    gamma: f64,
    normal: MomentSpec,
    stress: MomentSpec,
    ambiguity: AmbiguitySpec,
    normal_second: DMatrix<f64>,
    a_interval: Interval,
    grid: QGrid,
}

impl MeanVarProblem {
    pub fn new(
        gamma: f64,
        normal: MomentSpec,
        stress: MomentSpec,
        ambiguity: AmbiguitySpec,
    ) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidProblem(format!("gamma must be > 0, got {gamma}")));
        }
        if normal.dim() != stress.dim() {
            return Err(Error::InvalidProblem(format!(
                "regime dimensions differ: {} vs {}",
                normal.dim(),
                stress.dim()
            )));
        }
        let m = ambiguity.max_radius();
        let bound = (2.0 * (stress.second_moment_norm() + m * m))
            .max(normal.second_moment_norm())
            .sqrt();
        Ok(MeanVarProblem {
            gamma,
            normal_second: normal.raw_second_moment(),
            grid: QGrid::new(&ambiguity),
            a_interval: Interval::symmetric(bound),
            normal,
            stress,
            ambiguity,
        })
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn normal(&self) -> &MomentSpec {
        &self.normal
    }

    pub fn stress(&self) -> &MomentSpec {
        &self.stress
    }

    pub fn ambiguity(&self) -> &AmbiguitySpec {
        &self.ambiguity
    }

    /// Same moments and gamma, different ambiguity.
    pub fn with_ambiguity(&self, ambiguity: AmbiguitySpec) -> Result<Self> {
        MeanVarProblem::new(self.gamma, self.normal.clone(), self.stress.clone(), ambiguity)
    }

    pub fn expected_psi_normal(&self, x: &[f64], a: f64) -> f64 {
        expected_psi(&self.normal, x, a, self.gamma)
    }

    fn stress_shift(&self, x: &[f64], a: f64) -> f64 {
        dot(self.stress.mean.as_slice(), x) - (2.0 * a + self.gamma) / 2.0
    }

    /// `S_gamma(x, a)`.
    pub fn s_gamma(&self, x: &[f64], a: f64) -> f64 {
        let t = self.stress_shift(x, a);
        (quad(&self.stress.cov, x) + t * t).sqrt()
    }

    /// Worst-case `E[psi]` over the W2 ball of radius `r` around the stress
    /// reference.
    pub fn v_with_radius(&self, r: f64, x: &[f64], a: f64) -> f64 {
        let s = r * l2_norm(x) + self.s_gamma(x, a);
        s * s - a * self.gamma - self.gamma * self.gamma / 4.0
    }

    pub fn v_worst(&self, q: f64, x: &[f64], a: f64) -> f64 {
        self.v_with_radius(self.ambiguity.r(q), x, a)
    }

    pub fn h_objective(&self, q: f64, x: &[f64], a: f64) -> f64 {
        (1.0 - q) * self.expected_psi_normal(x, a) + q * self.v_worst(q, x, a)
    }

    /// The compact interval `[-B, B]` that contains every optimal `a`.
    pub fn a_interval(&self) -> Interval {
        self.a_interval
    }

    pub fn q_interval(&self) -> Interval {
        self.grid.interval()
    }

    /// Maximizer of `q -> h(q, x, a)` over the weight interval.
    pub fn worst_q(&self, x: &[f64], a: f64) -> WorstCase {
        let normal = self.expected_psi_normal(x, a);
        let xn = l2_norm(x);
        let s = self.s_gamma(x, a);
        let offset = -a * self.gamma - self.gamma * self.gamma / 4.0;
        self.grid.maximize(|q, r| {
            let t = r * xn + s;
            (1.0 - q) * normal + q * (t * t + offset)
        })
    }

    /// `J(x, a) = max_q h(q, x, a)`.
    pub fn j_value(&self, x: &[f64], a: f64) -> f64 {
        self.worst_q(x, a).value
    }

    /// Gradient of `h(q, ., .)` at `(x, a)`.
    pub fn h_gradient(&self, q: f64, x: &[f64], a: f64) -> (Vec<f64>, f64) {
        let gamma = self.gamma;
        let mu_n = self.normal.mean.as_slice();
        let mu_s = self.stress.mean.as_slice();
        let r = self.ambiguity.r(q);
        let xn = l2_norm(x);
        let s = self.s_gamma(x, a);
        let t = self.stress_shift(x, a);
        let scale = r * xn + s;

        let second_x = mat_vec(&self.normal_second, x);
        let sigma_s_x = mat_vec(&self.stress.cov, x);
        let g_x = (0..x.len())
            .map(|i| {
                let normal = 2.0 * second_x[i] - 2.0 * a * mu_n[i] - gamma * mu_n[i];
                let stress = 2.0 * scale * (r * x[i] / xn + (sigma_s_x[i] + t * mu_s[i]) / s);
                (1.0 - q) * normal + q * stress
            })
            .collect();
        let normal_a = -2.0 * (dot(mu_n, x) - a);
        let stress_a = -2.0 * scale / s * t - gamma;
        (g_x, (1.0 - q) * normal_a + q * stress_a)
    }

    /// Danskin subgradient of `J` at `(x, a)`: the gradient of `h` at the
    /// worst-case weight.
    pub fn j_subgradient(&self, x: &[f64], a: f64) -> Subgradient {
        let wc = self.worst_q(x, a);
        let (g_x, g_aux) = self.h_gradient(wc.q, x, a);
        Subgradient { q: wc.q, value: wc.value, g_x, g_aux }
    }

    /// `d^2 h / dq^2` for `q` strictly inside `(0, 1)`.
    pub fn h_qq(&self, q: f64, x: &[f64], a: f64) -> Result<f64> {
        let (r1, r2) = self.ambiguity.radius.derivatives(q)?;
        let r = self.ambiguity.r(q);
        let xn = l2_norm(x);
        let s = self.s_gamma(x, a);
        let v_q = 2.0 * (r * xn + s) * r1 * xn;
        let v_qq = 2.0 * r1 * r1 * xn * xn + 2.0 * (r * xn + s) * r2 * xn;
        Ok(2.0 * v_q + q * v_qq)
    }

    /// Smallest eigenvalue of `[[Sigma_N + mu_N mu_N', -mu_N], [-mu_N', 1]]`.
    pub fn lambda_m(&self) -> f64 {
        smallest_eigenvalue(&curvature_block(&self.normal))
    }
}

impl MinimaxObjective for MeanVarProblem {
    fn kind(&self) -> &'static str {
        "mean_var"
    }

    fn dim(&self) -> usize {
        self.dim()
    }

    fn ambiguity(&self) -> &AmbiguitySpec {
        &self.ambiguity
    }

    fn aux_interval(&self) -> Interval {
        self.a_interval
    }

    fn h_value(&self, q: f64, x: &[f64], aux: f64) -> f64 {
        self.h_objective(q, x, aux)
    }

    fn h_gradient(&self, q: f64, x: &[f64], aux: f64) -> (Vec<f64>, f64) {
        MeanVarProblem::h_gradient(self, q, x, aux)
    }

    fn worst_q(&self, x: &[f64], aux: f64) -> WorstCase {
        MeanVarProblem::worst_q(self, x, aux)
    }

    fn lambda_m(&self) -> Option<f64> {
        Some(MeanVarProblem::lambda_m(self))
    }

    fn h_qq(&self, q: f64, x: &[f64], aux: f64) -> Option<f64> {
        MeanVarProblem::h_qq(self, q, x, aux).ok()
    }
}

/// The `(d+1) x (d+1)` matrix whose smallest eigenvalue bounds the
/// curvature of the normal-regime term.
pub fn curvature_block(moments: &MomentSpec) -> DMatrix<f64> {
    let d = moments.dim();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(&moments.raw_second_moment());
    for i in 0..d {
        m[(i, d)] = -moments.mean[i];
        m[(d, i)] = -moments.mean[i];
    }
    m[(d, d)] = 1.0;
    m
}

pub(crate) fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}
