//! Step-size schedules, selected by name from a registry.

use std::sync::OnceLock;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::objective::MinimaxObjective;
use crate::registry::Registry;

use super::constants::{estimate_constants, DEFAULT_SAMPLES};

/// `{"kind": "...", <parameters>}` as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl ScheduleSpec {
    pub fn named(kind: &str) -> Self {
        ScheduleSpec { kind: kind.to_string(), params: Map::new() }
    }

    pub fn fixed(eta: f64) -> Self {
        Self::named("fixed").with("eta", json!(eta))
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

pub trait StepSchedule: Send + Sync + std::fmt::Debug {
    /// Step size for step `k`, counting from 1.
    fn step(&self, k: usize) -> f64;

    /// Averaging scheme the matching convergence guarantee is stated for.
    fn default_averaging(&self) -> &'static str;

    /// Resolved parameters, for run manifests.
    fn describe(&self) -> Value;
}

/// What a builder may consult when filling in parameters left out of the
/// configuration.
pub struct ScheduleContext<'a> {
    pub objective: &'a dyn MinimaxObjective,
    pub iterations: usize,
    pub seed: u64,
}

pub type ScheduleBuilder = fn(&ScheduleSpec, &ScheduleContext<'_>) -> Result<Box<dyn StepSchedule>>;

fn params<T: DeserializeOwned>(spec: &ScheduleSpec) -> Result<T> {
    serde_json::from_value(Value::Object(spec.params.clone()))
        .map_err(|e| Error::Config(format!("schedule '{}': {e}", spec.kind)))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be a positive number, got {v}")))
    }
}

#[derive(Debug)]
pub struct Fixed {
    pub eta: f64,
}

impl StepSchedule for Fixed {
    fn step(&self, _k: usize) -> f64 {
        self.eta
    }

    fn default_averaging(&self) -> &'static str {
        "last_iterate"
    }

    fn describe(&self) -> Value {
        json!({"kind": "fixed", "eta": self.eta})
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedParams {
    eta: f64,
}

fn build_fixed(spec: &ScheduleSpec, _: &ScheduleContext<'_>) -> Result<Box<dyn StepSchedule>> {
    let p: FixedParams = params(spec)?;
    Ok(Box::new(Fixed { eta: positive("eta", p.eta)? }))
}

/// `eta = R / (G sqrt(T))` for a `G`-Lipschitz objective on a set of
/// diameter `R`.
#[derive(Debug)]
pub struct Lipschitz {
    pub radius: f64,
    pub lipschitz: f64,
    pub iterations: usize,
}

impl StepSchedule for Lipschitz {
    fn step(&self, _k: usize) -> f64 {
        self.radius / (self.lipschitz * (self.iterations.max(1) as f64).sqrt())
    }

    fn default_averaging(&self) -> &'static str {
        "uniform"
    }

    fn describe(&self) -> Value {
        json!({"kind": "lipschitz", "r": self.radius, "g": self.lipschitz, "eta": self.step(1)})
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LipschitzParams {
    r: Option<f64>,
    g: Option<f64>,
    /// `"estimated"` (default): sampled subgradient norms on the solver
    /// domain. `"analytic"`: the objective's closed-form bound.
    bound: Option<String>,
    samples: Option<usize>,
}

fn build_lipschitz(spec: &ScheduleSpec, ctx: &ScheduleContext<'_>) -> Result<Box<dyn StepSchedule>> {
    let p: LipschitzParams = params(spec)?;
    let radius = match p.r {
        Some(r) => positive("r", r)?,
        None => ctx.objective.diameter(),
    };
    let estimated = || estimate_constants(ctx.objective, p.samples.unwrap_or(DEFAULT_SAMPLES), ctx.seed).k1;
    let lipschitz = match (p.g, p.bound.as_deref()) {
        (Some(g), None) => positive("g", g)?,
        (Some(_), Some(_)) => return Err(Error::Config("lipschitz: give either g or bound, not both".into())),
        (None, None | Some("estimated")) => estimated(),
        (None, Some("analytic")) => ctx.objective.lipschitz_bound().ok_or_else(|| {
            Error::Config(format!("lipschitz: no analytic bound for a {} objective", ctx.objective.kind()))
        })?,
        (None, Some(other)) => {
            return Err(Error::Config(format!(
                "lipschitz: unknown bound '{other}', expected 'estimated' or 'analytic'"
            )))
        }
    };
    Ok(Box::new(Lipschitz { radius, lipschitz, iterations: ctx.iterations }))
}

/// `eta_k = 2 / (alpha (k + 1))` for an `alpha`-strongly convex objective.
#[derive(Debug)]
pub struct StronglyConvex {
    pub alpha: f64,
}

impl StepSchedule for StronglyConvex {
    fn step(&self, k: usize) -> f64 {
        2.0 / (self.alpha * (k + 1) as f64)
    }

    fn default_averaging(&self) -> &'static str {
        "weighted_k"
    }

    fn describe(&self) -> Value {
        json!({"kind": "strongly_convex", "alpha": self.alpha})
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StronglyConvexParams {
    alpha: Option<f64>,
}

fn build_strongly_convex(
    spec: &ScheduleSpec,
    ctx: &ScheduleContext<'_>,
) -> Result<Box<dyn StepSchedule>> {
    let p: StronglyConvexParams = params(spec)?;
    let alpha = match (p.alpha, ctx.objective.strong_convexity()) {
        (Some(a), _) => positive("alpha", a)?,
        (None, Some(a)) => a,
        (None, None) => {
            return Err(Error::Config(format!(
                "strongly_convex schedule needs an explicit alpha for a {} objective",
                ctx.objective.kind()
            )))
        }
    };
    Ok(Box::new(StronglyConvex { alpha }))
}

/// Constant step `K4 / (K3^2 + K2 K4)` from the smoothness constants.
#[derive(Debug)]
pub struct SmoothGeometric {
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl SmoothGeometric {
    pub fn eta(&self) -> f64 {
        self.k4 / (self.k3 * self.k3 + self.k2 * self.k4)
    }
}

impl StepSchedule for SmoothGeometric {
    fn step(&self, _k: usize) -> f64 {
        self.eta()
    }

    fn default_averaging(&self) -> &'static str {
        "last_iterate"
    }

    fn describe(&self) -> Value {
        json!({
            "kind": "smooth_geometric",
            "k2": self.k2,
            "k3": self.k3,
            "k4": self.k4,
            "eta": self.eta(),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SmoothGeometricParams {
    k2: Option<f64>,
    k3: Option<f64>,
    k4: Option<f64>,
    samples: Option<usize>,
}

fn build_smooth_geometric(
    spec: &ScheduleSpec,
    ctx: &ScheduleContext<'_>,
) -> Result<Box<dyn StepSchedule>> {
    let p: SmoothGeometricParams = params(spec)?;
    let d = ctx.objective.dim();
    let k4 = match p.k4 {
        Some(v) => positive("k4", v)?,
        None => ctx.objective.ambiguity().k4_constant(d)?,
    };
    let (k2, k3) = match (p.k2, p.k3) {
        (Some(k2), Some(k3)) => (positive("k2", k2)?, k3.max(0.0)),
        (k2, k3) => {
            let c = estimate_constants(ctx.objective, p.samples.unwrap_or(DEFAULT_SAMPLES), ctx.seed);
            (k2.unwrap_or(c.k2), k3.unwrap_or(c.k3))
        }
    };
    let schedule = SmoothGeometric { k2: positive("k2", k2)?, k3, k4 };
    positive("smooth_geometric eta", schedule.eta())?;
    Ok(Box::new(schedule))
}

fn builtin() -> Registry<ScheduleBuilder> {
    let mut r = Registry::new("step schedule");
    r.register("fixed", build_fixed as ScheduleBuilder)
        .register("lipschitz", build_lipschitz)
        .register("strongly_convex", build_strongly_convex)
        .register("smooth_geometric", build_smooth_geometric);
    r
}

/// The built-in schedules. Clone and extend to add more.
pub fn schedules() -> &'static Registry<ScheduleBuilder> {
    static REGISTRY: OnceLock<Registry<ScheduleBuilder>> = OnceLock::new();
    REGISTRY.get_or_init(builtin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::AmbiguitySpec;
    use crate::meanvar::{MeanVarProblem, MomentSpec};

    fn problem() -> MeanVarProblem {
        let n = MomentSpec::from_rows(vec![0.03, 0.06], vec![vec![0.002, 0.0004], vec![0.0004, 0.003]]).unwrap();
        let s = MomentSpec::from_rows(vec![-0.1, -0.15], vec![vec![0.02, 0.01], vec![0.01, 0.03]]).unwrap();
        MeanVarProblem::new(0.1, n, s, AmbiguitySpec::new(0.2, 0.01, 0.1, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn strongly_convex_steps() {
        let s = StronglyConvex { alpha: 2.0 };
        assert_eq!(s.step(1), 0.5);
        assert_eq!(s.step(3), 0.25);
    }

    #[test]
    fn builders_fill_defaults() {
        let p = problem();
        let ctx = ScheduleContext { objective: &p, iterations: 100, seed: 1 };
        let reg = schedules();
        let lip = (reg.get("lipschitz").unwrap())(&ScheduleSpec::named("lipschitz"), &ctx).unwrap();
        assert!(lip.step(1) > 0.0);
        let sc = (reg.get("strongly_convex").unwrap())(&ScheduleSpec::named("strongly_convex"), &ctx).unwrap();
        assert_eq!(sc.default_averaging(), "weighted_k");
        let geo = (reg.get("smooth_geometric").unwrap())(&ScheduleSpec::named("smooth_geometric"), &ctx).unwrap();
        assert!(geo.step(1) > 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        let p = problem();
        let ctx = ScheduleContext { objective: &p, iterations: 10, seed: 0 };
        let build = schedules().get("fixed").unwrap();
        assert!(build(&ScheduleSpec::named("fixed"), &ctx).is_err());
        assert!(build(&ScheduleSpec::fixed(-1.0), &ctx).is_err());
        assert!(build(&ScheduleSpec::fixed(0.1).with("bogus", json!(1)), &ctx).is_err());
        assert!(schedules().get("nesterov").is_err());
        let lip = schedules().get("lipschitz").unwrap();
        let analytic = ScheduleSpec::named("lipschitz").with("bound", json!("analytic"));
        assert!(matches!(lip(&analytic, &ctx), Err(Error::Config(_))));
        let both = ScheduleSpec::named("lipschitz").with("bound", json!("estimated")).with("g", json!(2.0));
        assert!(lip(&both, &ctx).is_err());
        let explicit = ScheduleSpec::named("lipschitz").with("g", json!(2.0)).with("r", json!(4.0));
        assert!((lip(&explicit, &ctx).unwrap().step(1) - 4.0 / (2.0 * 10f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn spec_round_trips() {
        let spec: ScheduleSpec = serde_json::from_str(r#"{"kind":"fixed","eta":0.001}"#).unwrap();
        assert_eq!(spec, ScheduleSpec::fixed(0.001));
    }
}
