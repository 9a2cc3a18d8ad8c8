//! The interface the solver sees: a convex-concave integrand `h(q, x, aux)`
//! over the simplex, an auxiliary interval and a weight interval.

use crate::ambiguity::{AmbiguitySpec, Warning};
use crate::geometry::dot;
use crate::interval::Interval;
use crate::qsearch::WorstCase;

/// Value and partial derivatives of `h` at the worst-case weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    pub q: f64,
    pub value: f64,
    pub g_x: Vec<f64>,
    pub g_aux: f64,
}

impl Subgradient {
    pub fn norm(&self) -> f64 {
        (dot(&self.g_x, &self.g_x) + self.g_aux * self.g_aux).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.g_aux.is_finite() && self.g_x.iter().all(|v| v.is_finite())
    }
}

pub trait MinimaxObjective: Send + Sync {
    /// Short identifier used in outputs (`mean_var`, `mean_cvar`).
    fn kind(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn ambiguity(&self) -> &AmbiguitySpec;

    /// Interval for the auxiliary variable (`a` or `tau`).
    fn aux_interval(&self) -> Interval;

    fn q_interval(&self) -> Interval {
        self.ambiguity().q_interval()
    }

    fn h_value(&self, q: f64, x: &[f64], aux: f64) -> f64;

    fn h_gradient(&self, q: f64, x: &[f64], aux: f64) -> (Vec<f64>, f64);

    fn worst_q(&self, x: &[f64], aux: f64) -> WorstCase;

    fn value(&self, x: &[f64], aux: f64) -> f64 {
        self.worst_q(x, aux).value
    }

    fn subgradient(&self, x: &[f64], aux: f64) -> Subgradient {
        let wc = self.worst_q(x, aux);
        let (g_x, g_aux) = self.h_gradient(wc.q, x, aux);
        Subgradient { q: wc.q, value: wc.value, g_x, g_aux }
    }

    /// Smallest eigenvalue of the normal-regime curvature block, when the
    /// integrand has one.
    fn lambda_m(&self) -> Option<f64> {
        None
    }

    /// Strong convexity modulus of `h(q, .)` in `(x, aux)`, uniform over the
    /// weight interval: `lambda_M (1 - q_max)`.
    fn strong_convexity(&self) -> Option<f64> {
        let q_max = self.q_interval().hi;
        self.lambda_m().map(|l| l * (1.0 - q_max)).filter(|v| *v > 0.0)
    }

    /// `d^2 h / dq^2`, by central differences unless overridden.
    fn h_qq(&self, q: f64, x: &[f64], aux: f64) -> Option<f64> {
        let step = 1e-4;
        if !(q - step > 0.0 && q + step < 1.0) {
            return None;
        }
        let f = |q: f64| self.h_value(q, x, aux);
        Some((f(q + step) - 2.0 * f(q) + f(q - step)) / (step * step))
    }

    /// Analytic bound on the subgradient norm when one is known.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }

    fn warnings(&self) -> Vec<Warning> {
        self.ambiguity().warnings()
    }

    /// Part of `aux_interval` known to contain a minimizing `aux` for every
    /// `x`. The solver iterates on `simplex x aux_domain`; the minimum is the
    /// same as over the full interval.
    fn aux_domain(&self) -> Interval {
        self.aux_interval()
    }

    /// Diameter of `simplex x aux_domain`.
    fn diameter(&self) -> f64 {
        let w = self.aux_domain().width();
        let simplex = if self.dim() > 1 { 2.0 } else { 0.0 };
        (simplex + w * w).sqrt()
    }
}
