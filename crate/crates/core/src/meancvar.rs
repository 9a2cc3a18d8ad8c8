//! Robust Mean-CVaR objective.
//!
//! With the loss `l(R) = -x'R + k max(-x'R - tau, 0)`, `k = rho / (1 - p)`,
//! the worst case over the W1 ball adds `r(q) (1 + k) ||x||_inf` to the
//! stress expectation, and the problem becomes
//!
//! ```text
//! min_{x, tau} rho tau + max_q (1 - q) E_N[l] + q (E_S[l] + r(q) (1 + k) ||x||_inf)
//! ```

use serde::{Deserialize, Serialize};

use crate::ambiguity::AmbiguitySpec;
use crate::error::{Error, Result};
use crate::geometry::{dot, inf_norm, inf_norm_subgradient, l1_norm, l2_norm};
use crate::interval::Interval;
use crate::objective::{MinimaxObjective, Subgradient};
use crate::qsearch::{QGrid, WorstCase};

/// Return observations, one row per period, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("sample set needs at least one asset"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "sample buffer of length {} does not hold whole rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample set contains non-finite returns"));
        }
        Ok(SampleSet { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("sample rows have different lengths"));
        }
        SampleSet::from_flat(dim, rows.into_iter().flatten().collect())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn portfolio_returns(&self, x: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(r, x)).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn mean_l1_norm(&self) -> f64 {
        self.rows().map(l1_norm).sum::<f64>() / self.len() as f64
    }

    pub fn mean_l2_norm(&self) -> f64 {
        self.rows().map(l2_norm).sum::<f64>() / self.len() as f64
    }

    /// Concatenation of two sample sets with the same dimension.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.dim != other.dim {
            return Err(Error::invalid("cannot pool sample sets of different dimension"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        SampleSet::from_flat(self.dim, data)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SampleSet {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SampleSet::from_rows(rows)
    }
}

impl From<SampleSet> for Vec<Vec<f64>> {
    fn from(s: SampleSet) -> Self {
        s.rows().map(<[f64]>::to_vec).collect()
    }
}

/// `l(r) = -x'r + (rho / (1 - p)) max(-x'r - tau, 0)`.
pub fn loss(x: &[f64], tau: f64, r: &[f64], rho: f64, p: f64) -> f64 {
    let y = -dot(x, r);
    y + rho / (1.0 - p) * (y - tau).max(0.0)
}

/// Exact empirical CVaR: the minimum of `tau + mean(max(L - tau, 0)) / (1 - p)`.
///
/// The objective is piecewise linear with kinks at the sample values, so the
/// minimum is attained at one of them. With the losses sorted ascending and
/// suffix sums, every candidate costs O(1).
pub fn cvar_empirical(losses: &[f64], p: f64) -> f64 {
    assert!(!losses.is_empty(), "cvar of an empty sample");
    assert!(p > 0.0 && p < 1.0, "cvar level must lie in (0, 1)");
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let scale = 1.0 / (n as f64 * (1.0 - p));
    let mut suffix = 0.0;
    let mut best = f64::INFINITY;
    for k in (0..n).rev() {
        let tau = sorted[k];
        // Sum over losses strictly after k of (L - tau); ties contribute zero.
        let excess = suffix - (n - 1 - k) as f64 * tau;
        best = best.min(tau + excess * scale);
        suffix += tau;
    }
    best
}

/// Per-regime loss statistics at a fixed `(x, tau)`.
#[derive(Debug, Clone)]
struct RegimeStats {
    expected_loss: f64,
    tail_prob: f64,
    /// `-E[R] - k E[R 1{-x'R > tau}]`.
    loss_gradient: Vec<f64>,
}

/// Smallest and largest minimizers of `tau + E_w[(y - tau)^+] / (1 - p)` for
/// `(value, weight)` pairs: the lower and upper `p`-quantiles.
fn quantile_bracket(mut pairs: Vec<(f64, f64)>, p: f64) -> (f64, f64) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|v| v.1).sum();
    let tol = 1e-12 * total;
    let mut acc = 0.0;
    let mut lo = pairs[pairs.len() - 1].0;
    for &(v, w) in &pairs {
        acc += w;
        if acc >= p * total - tol {
            lo = v;
            break;
        }
    }
    acc = 0.0;
    let mut hi = pairs[0].0;
    for &(v, w) in pairs.iter().rev() {
        acc += w;
        if acc >= (1.0 - p) * total - tol {
            hi = v;
            break;
        }
    }
    (lo, hi)
}

/// Interval containing a minimizing tau of `J(x, .)` for every `x`.
///
/// For fixed `q` the minimizers are `p`-quantiles of the losses `-x'R`
/// under weights `(1 - q) / n_N` and `q / n_S`. Each loss lies between the
/// extreme negated coordinates of its row and quantiles are monotone in the
/// values, so quantiles of those extremes bound every `x`. The mixture CDF is
/// linear in `q`, so the endpoints of the weight interval suffice. The
/// maximum over `q` only adds a tau-free term and keeps the minimizer inside.
fn optimal_tau_bracket(normal: &SampleSet, stress: &SampleSet, weights: Interval, p: f64) -> Option<Interval> {
    let extremes = |s: &SampleSet| -> Vec<(f64, f64)> {
        s.rows()
            .map(|r| r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(-v), hi.max(-v))))
            .collect()
    };
    let (en, es) = (extremes(normal), extremes(stress));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for q in [weights.lo, weights.hi] {
        let wn = (1.0 - q) / en.len() as f64;
        let ws = q / es.len() as f64;
        let with = |pick: fn(&(f64, f64)) -> f64| -> Vec<(f64, f64)> {
            en.iter()
                .map(|e| (pick(e), wn))
                .chain(es.iter().map(|e| (pick(e), ws)))
                .filter(|v| v.1 > 0.0)
                .collect()
        };
        lo = lo.min(quantile_bracket(with(|e| e.0), p).0);
        hi = hi.max(quantile_bracket(with(|e| e.1), p).1);
    }
    (lo.is_finite() && hi.is_finite() && lo <= hi).then(|| Interval::new(lo, hi))
}

#[derive(Debug, Clone)]
pub struct MeanCVaRProblem {
    rho: f64,
    p: f64,
    normal: SampleSet,
    stress: SampleSet,
    ambiguity: AmbiguitySpec,
    normal_mean: Vec<f64>,
    stress_mean: Vec<f64>,
    tau_interval: Interval,
    tau_domain: Interval,
    grid: QGrid,
}

impl MeanCVaRProblem {
    pub fn new(
        rho: f64,
        p: f64,
        normal: SampleSet,
        stress: SampleSet,
        ambiguity: AmbiguitySpec,
    ) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidProblem(format!("rho must be > 0, got {rho}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProblem(format!("p must lie in (0, 1), got {p}")));
        }
        if normal.is_empty() || stress.is_empty() {
            return Err(Error::InvalidProblem("sample sets must be non-empty".into()));
        }
        if normal.dim() != stress.dim() {
            return Err(Error::InvalidProblem(format!(
                "regime dimensions differ: {} vs {}",
                normal.dim(),
                stress.dim()
            )));
        }
        let m = ambiguity.max_radius();
        let level = (1.0 / (1.0 - p)).max(1.0 / p);
        let bound = level * (stress.mean_l1_norm() + m).max(normal.mean_l1_norm());
        let tau_interval = Interval::symmetric(bound);
        let tau_domain = optimal_tau_bracket(&normal, &stress, ambiguity.q_interval(), p)
            .and_then(|b| b.intersect(tau_interval))
            .unwrap_or(tau_interval);
        Ok(MeanCVaRProblem {
            rho,
            p,
            normal_mean: normal.mean(),
            stress_mean: stress.mean(),
            tau_interval,
            tau_domain,
            grid: QGrid::new(&ambiguity),
            normal,
            stress,
            ambiguity,
        })
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn normal(&self) -> &SampleSet {
        &self.normal
    }

    pub fn stress(&self) -> &SampleSet {
        &self.stress
    }

    pub fn with_ambiguity(&self, ambiguity: AmbiguitySpec) -> Result<Self> {
        MeanCVaRProblem::new(self.rho, self.p, self.normal.clone(), self.stress.clone(), ambiguity)
    }

    /// `rho / (1 - p)`.
    fn hinge_weight(&self) -> f64 {
        self.rho / (1.0 - self.p)
    }

    /// Lipschitz factor of the loss in `R`, per unit of `||x||_inf`.
    fn transport_factor(&self) -> f64 {
        1.0 + self.hinge_weight()
    }

    pub fn tau_interval(&self) -> Interval {
        self.tau_interval
    }

    /// Interval holding a minimizing tau of `J(x, .)` for every `x`.
    pub fn tau_domain(&self) -> Interval {
        self.tau_domain
    }

    fn expected_loss(&self, samples: &SampleSet, x: &[f64], tau: f64) -> f64 {
        let k = self.hinge_weight();
        let total: f64 = samples
            .rows()
            .map(|r| {
                let y = -dot(x, r);
                y + k * (y - tau).max(0.0)
            })
            .sum();
        total / samples.len() as f64
    }

    fn stats(&self, samples: &SampleSet, mean: &[f64], x: &[f64], tau: f64) -> RegimeStats {
        let k = self.hinge_weight();
        let d = samples.dim();
        let mut tail_sum = vec![0.0; d];
        let mut tail_count = 0usize;
        let mut loss = 0.0;
        for r in samples.rows() {
            let y = -dot(x, r);
            loss += y;
            if y > tau {
                loss += k * (y - tau);
                tail_count += 1;
                for (acc, v) in tail_sum.iter_mut().zip(r) {
                    *acc += v;
                }
            }
        }
        let n = samples.len() as f64;
        RegimeStats {
            expected_loss: loss / n,
            tail_prob: tail_count as f64 / n,
            loss_gradient: mean
                .iter()
                .zip(&tail_sum)
                .map(|(m, t)| -m - k * t / n)
                .collect(),
        }
    }

    /// `h(q, x, tau)`, the integrand before maximizing over `q`.
    pub fn h_objective(&self, q: f64, x: &[f64], tau: f64) -> f64 {
        let a = self.expected_loss(&self.normal, x, tau);
        let b = self.expected_loss(&self.stress, x, tau);
        let l = self.transport_factor() * inf_norm(x);
        self.rho * tau + (1.0 - q) * a + q * (b + self.ambiguity.r(q) * l)
    }

    pub fn worst_q(&self, x: &[f64], tau: f64) -> WorstCase {
        let a = self.expected_loss(&self.normal, x, tau);
        let b = self.expected_loss(&self.stress, x, tau);
        self.worst_q_from(a, b, x, tau)
    }

    fn worst_q_from(&self, a: f64, b: f64, x: &[f64], tau: f64) -> WorstCase {
        let l = self.transport_factor() * inf_norm(x);
        let base = self.rho * tau;
        self.grid.maximize(|q, r| base + (1.0 - q) * a + q * (b + r * l))
    }

    /// `(J(x, tau), q*)`.
    pub fn j_cvar(&self, x: &[f64], tau: f64) -> (f64, f64) {
        let wc = self.worst_q(x, tau);
        (wc.value, wc.q)
    }

    fn gradient_at(
        &self,
        q: f64,
        normal: &RegimeStats,
        stress: &RegimeStats,
        x: &[f64],
    ) -> (Vec<f64>, f64) {
        let shift = q * self.ambiguity.r(q) * self.transport_factor();
        let sub = inf_norm_subgradient(x);
        let g_x = (0..x.len())
            .map(|i| {
                (1.0 - q) * normal.loss_gradient[i]
                    + q * stress.loss_gradient[i]
                    + shift * sub[i]
            })
            .collect();
        let g_tau = self.rho
            - self.hinge_weight() * ((1.0 - q) * normal.tail_prob + q * stress.tail_prob);
        (g_x, g_tau)
    }

    /// Gradient of `h(q, ., .)` (a subgradient at kinks, with the strict
    /// indicator `-x'R > tau`).
    pub fn h_gradient(&self, q: f64, x: &[f64], tau: f64) -> (Vec<f64>, f64) {
        let normal = self.stats(&self.normal, &self.normal_mean, x, tau);
        let stress = self.stats(&self.stress, &self.stress_mean, x, tau);
        self.gradient_at(q, &normal, &stress, x)
    }

    pub fn j_cvar_subgradient(&self, x: &[f64], tau: f64) -> Subgradient {
        let normal = self.stats(&self.normal, &self.normal_mean, x, tau);
        let stress = self.stats(&self.stress, &self.stress_mean, x, tau);
        let wc = self.worst_q_from(normal.expected_loss, stress.expected_loss, x, tau);
        let (g_x, g_aux) = self.gradient_at(wc.q, &normal, &stress, x);
        Subgradient { q: wc.q, value: wc.value, g_x, g_aux }
    }

    fn k9_with_radius(&self, k8: f64) -> f64 {
        let k67 = self.normal.mean_l2_norm().max(self.stress.mean_l2_norm());
        let first = self.transport_factor() * (k67 + k8);
        let second = self.rho * (self.p / (1.0 - self.p)).max(1.0);
        (first * first + second * second).sqrt()
    }

    /// Subgradient norm bound with the radius maximized over the weight
    /// interval.
    pub fn k9_constant(&self) -> f64 {
        self.k9_with_radius(self.ambiguity.max_radius())
    }

    /// The same bound with the radius maximized over all of `[0, 1]`.
    pub fn k9_constant_global(&self) -> f64 {
        self.k9_with_radius(self.ambiguity.global_max_radius())
    }
}

impl MinimaxObjective for MeanCVaRProblem {
    fn kind(&self) -> &'static str {
        "mean_cvar"
    }

    fn dim(&self) -> usize {
        self.dim()
    }

    fn ambiguity(&self) -> &AmbiguitySpec {
        &self.ambiguity
    }

    fn aux_interval(&self) -> Interval {
        self.tau_interval
    }

    fn aux_domain(&self) -> Interval {
        self.tau_domain
    }

    fn h_value(&self, q: f64, x: &[f64], aux: f64) -> f64 {
        self.h_objective(q, x, aux)
    }

    fn h_gradient(&self, q: f64, x: &[f64], aux: f64) -> (Vec<f64>, f64) {
        MeanCVaRProblem::h_gradient(self, q, x, aux)
    }

    fn worst_q(&self, x: &[f64], aux: f64) -> WorstCase {
        MeanCVaRProblem::worst_q(self, x, aux)
    }

    fn subgradient(&self, x: &[f64], aux: f64) -> Subgradient {
        self.j_cvar_subgradient(x, aux)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.k9_constant())
    }
}
