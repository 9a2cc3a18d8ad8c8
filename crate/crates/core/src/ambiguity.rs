//! Mixture ambiguity: the interval of stress-regime weights and the
//! beta-shaped Wasserstein radius `r(q) = c q^(alpha-1) (1-q)^(beta-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

pub const DEFAULT_CONCENTRATION: f64 = 10.0;

/// Conditions that do not block a solve but void part of the theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// `epsilon >= min(q0, 1 - q0)`: the weight interval reaches 0 or 1 and is
    /// clipped to `[0, 1]`; strong concavity in `q` cannot be relied upon.
    IntervalReachesBoundary { q0: f64, epsilon: f64, interval: Interval },
}

/// `r(q) = c * q^(alpha-1) * (1-q)^(beta-1)` with `alpha = M q0 + 1`,
/// `beta = M (1 - q0) + 1`, so that the mode sits at `q0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusFunction {
    pub c: f64,
    pub concentration: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl RadiusFunction {
    pub fn new(c: f64, concentration: f64, q0: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid(format!("radius scale c must be >= 0, got {c}")));
        }
        if !(concentration.is_finite() && concentration > 0.0) {
            return Err(Error::invalid(format!(
                "radius concentration M must be > 0, got {concentration}"
            )));
        }
        if !(q0 > 0.0 && q0 < 1.0) {
            return Err(Error::invalid(format!("q0 must lie in (0, 1), got {q0}")));
        }
        Ok(RadiusFunction {
            c,
            concentration,
            alpha: concentration * q0 + 1.0,
            beta: concentration * (1.0 - q0) + 1.0,
        })
    }

    /// Location of the maximum on `[0, 1]`.
    pub fn mode(&self) -> f64 {
        (self.alpha - 1.0) / (self.alpha + self.beta - 2.0)
    }

    pub fn radius(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("radius evaluated at q = {q} outside [0, 1]")));
        }
        Ok(self.eval(q))
    }

    /// Unchecked evaluation, `0^0 = 1` at the endpoints.
    pub(crate) fn eval(&self, q: f64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        self.c * q.powf(self.alpha - 1.0) * (1.0 - q).powf(self.beta - 1.0)
    }

    /// Exact `(r'(q), r''(q))` for `q` strictly inside `(0, 1)`.
    pub fn derivatives(&self, q: f64) -> Result<(f64, f64)> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!(
                "radius derivatives need q in (0, 1), got {q}"
            )));
        }
        let r = self.eval(q);
        let a = self.alpha - 1.0;
        let b = self.beta - 1.0;
        let s = a / q - b / (1.0 - q);
        let ds = -a / (q * q) - b / ((1.0 - q) * (1.0 - q));
        Ok((r * s, r * (s * s + ds)))
    }

    /// Maximum of `r` over `interval` (which must lie in `[0, 1]`).
    ///
    /// The beta form is unimodal, so the maximum is at the mode when the mode
    /// is inside and at the nearer endpoint otherwise.
    pub fn max_on(&self, interval: Interval) -> f64 {
        let mode = self.mode();
        if interval.contains(mode) {
            self.eval(mode)
        } else {
            self.eval(interval.lo).max(self.eval(interval.hi))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RadiusFunction { c: self.c * factor, ..*self }
    }
}

/// Weight interval `[q0 - epsilon, q0 + epsilon]` and the radius function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    pub q0: f64,
    pub epsilon: f64,
    pub radius: RadiusFunction,
}

impl AmbiguitySpec {
    pub fn new(q0: f64, epsilon: f64, c: f64, concentration: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let radius = RadiusFunction::new(c, concentration, q0)?;
        Ok(AmbiguitySpec { q0, epsilon, radius })
    }

    /// No weight ambiguity and zero radius: the plain two-regime mixture.
    pub fn point(q0: f64) -> Result<Self> {
        AmbiguitySpec::new(q0, 0.0, 0.0, DEFAULT_CONCENTRATION)
    }

    /// The searched interval `[q0 - eps, q0 + eps]` intersected with `[0, 1]`.
    pub fn q_interval(&self) -> Interval {
        Interval::new(
            (self.q0 - self.epsilon).max(0.0),
            (self.q0 + self.epsilon).min(1.0),
        )
    }

    /// `epsilon < min(q0, 1 - q0)` keeps `q` away from 0 and 1.
    pub fn satisfies_strict_interval(&self) -> bool {
        self.epsilon < self.q0.min(1.0 - self.q0)
    }

    pub fn warnings(&self) -> Vec<Warning> {
        if self.satisfies_strict_interval() {
            Vec::new()
        } else {
            vec![Warning::IntervalReachesBoundary {
                q0: self.q0,
                epsilon: self.epsilon,
                interval: self.q_interval(),
            }]
        }
    }

    /// Largest radius over the weight interval.
    pub fn max_radius(&self) -> f64 {
        self.radius.max_on(self.q_interval())
    }

    /// Largest radius over all of `[0, 1]`.
    pub fn global_max_radius(&self) -> f64 {
        self.radius.max_on(Interval::new(0.0, 1.0))
    }

    pub fn r(&self, q: f64) -> f64 {
        self.radius.eval(q)
    }

    /// `K4 = -q0 r(q0) r''(q0) / d`, the curvature constant of the constant
    /// step schedule.
    pub fn k4_constant(&self, d: usize) -> Result<f64> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let (_, r2) = self.radius.derivatives(self.q0)?;
        if !(r2 < 0.0) {
            return Err(Error::NotApplicable(format!(
                "r''(q0) = {r2} is not negative; the geometric schedule is unavailable"
            )));
        }
        Ok(-self.q0 * self.radius.eval(self.q0) * r2 / d as f64)
    }

    pub fn with_scale(&self, c: f64) -> Self {
        AmbiguitySpec {
            radius: RadiusFunction { c, ..self.radius },
            ..self.clone()
        }
    }
}
