//! Disutility models for the experiments, selected by name.

use std::sync::OnceLock;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::ambiguity::AmbiguitySpec;
use crate::error::{Error, Result};
use crate::geometry::dot;
use crate::meancvar::{cvar_empirical, MeanCVaRProblem, SampleSet};
use crate::meanvar::MeanVarProblem;
use crate::objective::MinimaxObjective;
use crate::registry::Registry;

use super::model::{sample_moments, GeneratedDataset, RegimeModel};

/// `{"kind": "mean_var", "gamma": 0.1}` or
/// `{"kind": "mean_cvar", "rho": 10, "p": 0.95}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisutilitySpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

pub trait Disutility: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Two-regime robust problem from a labelled training set.
    fn fit(&self, data: &GeneratedDataset, ambiguity: AmbiguitySpec) -> Result<Box<dyn MinimaxObjective>>;

    /// Single pooled regime, no weight ambiguity, zero radius.
    fn saa(&self, data: &GeneratedDataset, q0: f64) -> Result<Box<dyn MinimaxObjective>>;

    /// Realized disutility of the portfolio returns `x'R` on a test set.
    fn evaluate(&self, portfolio_returns: &[f64]) -> f64;

    /// Problem whose minimizer is the best portfolio under the true
    /// distribution; `sample` is a large draw from it.
    fn truth(&self, model: &RegimeModel, sample: &GeneratedDataset, q0: f64) -> Result<Box<dyn MinimaxObjective>>;
}

fn params<T: DeserializeOwned>(spec: &DisutilitySpec) -> Result<T> {
    serde_json::from_value(Value::Object(spec.params.clone()))
        .map_err(|e| Error::Config(format!("disutility '{}': {e}", spec.kind)))
}

fn split(data: &GeneratedDataset, needed: usize) -> Result<(SampleSet, SampleSet)> {
    for (stress, regime) in [(false, "normal"), (true, "stress")] {
        let rows = data.regime_count(stress);
        if rows < needed {
            return Err(Error::InsufficientData { regime, rows, needed });
        }
    }
    Ok((data.regime(false).expect("checked"), data.regime(true).expect("checked")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanVar {
    pub gamma: f64,
}

impl Disutility for MeanVar {
    fn name(&self) -> &'static str {
        "mean_var"
    }

    fn fit(&self, data: &GeneratedDataset, ambiguity: AmbiguitySpec) -> Result<Box<dyn MinimaxObjective>> {
        let (normal, stress) = split(data, 2)?;
        let problem = MeanVarProblem::new(self.gamma, sample_moments(&normal)?, sample_moments(&stress)?, ambiguity)?;
        Ok(Box::new(problem))
    }

    fn saa(&self, data: &GeneratedDataset, q0: f64) -> Result<Box<dyn MinimaxObjective>> {
        if data.len() < 2 {
            return Err(Error::InsufficientData { regime: "pooled", rows: data.len(), needed: 2 });
        }
        let pooled = sample_moments(&data.pooled())?;
        let problem = MeanVarProblem::new(self.gamma, pooled.clone(), pooled, AmbiguitySpec::point(q0)?)?;
        Ok(Box::new(problem))
    }

    fn evaluate(&self, y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = if y.len() > 1 {
            y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        var - self.gamma * mean
    }

    /// Exact mixture moments: the mean-variance objective needs nothing else.
    fn truth(&self, model: &RegimeModel, _sample: &GeneratedDataset, q0: f64) -> Result<Box<dyn MinimaxObjective>> {
        let m = model.mixture_moments(model.q_true)?;
        Ok(Box::new(MeanVarProblem::new(self.gamma, m.clone(), m, AmbiguitySpec::point(q0)?)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanCVaR {
    pub rho: f64,
    pub p: f64,
}

impl Disutility for MeanCVaR {
    fn name(&self) -> &'static str {
        "mean_cvar"
    }

    fn fit(&self, data: &GeneratedDataset, ambiguity: AmbiguitySpec) -> Result<Box<dyn MinimaxObjective>> {
        let (normal, stress) = split(data, 1)?;
        Ok(Box::new(MeanCVaRProblem::new(self.rho, self.p, normal, stress, ambiguity)?))
    }

    fn saa(&self, data: &GeneratedDataset, q0: f64) -> Result<Box<dyn MinimaxObjective>> {
        let pooled = data.pooled();
        Ok(Box::new(MeanCVaRProblem::new(self.rho, self.p, pooled.clone(), pooled, AmbiguitySpec::point(q0)?)?))
    }

    fn evaluate(&self, y: &[f64]) -> f64 {
        let losses: Vec<f64> = y.iter().map(|v| -v).collect();
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        mean + self.rho * cvar_empirical(&losses, self.p)
    }

    /// SAA on a large sample from the true mixture.
    fn truth(&self, _model: &RegimeModel, sample: &GeneratedDataset, q0: f64) -> Result<Box<dyn MinimaxObjective>> {
        self.saa(sample, q0)
    }
}

pub type DisutilityBuilder = fn(&DisutilitySpec) -> Result<Box<dyn Disutility>>;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn build_mean_var(spec: &DisutilitySpec) -> Result<Box<dyn Disutility>> {
    let m: MeanVar = params(spec)?;
    positive("gamma", m.gamma)?;
    Ok(Box::new(m))
}

fn build_mean_cvar(spec: &DisutilitySpec) -> Result<Box<dyn Disutility>> {
    let m: MeanCVaR = params(spec)?;
    positive("rho", m.rho)?;
    if !(m.p > 0.0 && m.p < 1.0) {
        return Err(Error::Config(format!("p must lie in (0, 1), got {}", m.p)));
    }
    Ok(Box::new(m))
}

pub fn disutilities() -> &'static Registry<DisutilityBuilder> {
    static REGISTRY: OnceLock<Registry<DisutilityBuilder>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r = Registry::new("disutility");
        r.register("mean_var", build_mean_var as DisutilityBuilder)
            .register("mean_cvar", build_mean_cvar);
        r
    })
}

pub fn build_disutility(spec: &DisutilitySpec) -> Result<Box<dyn Disutility>> {
    (disutilities().get(&spec.kind)?)(spec)
}

/// Out-of-sample disutility of `x` on `test`.
pub fn evaluate_oos(x: &[f64], test: &GeneratedDataset, disutility: &dyn Disutility) -> f64 {
    let y: Vec<f64> = (0..test.len()).map(|i| dot(test.row(i), x)).collect();
    disutility.evaluate(&y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn constant_rows(r: &[f64], n: usize) -> GeneratedDataset {
        GeneratedDataset {
            d: r.len(),
            returns: r.iter().copied().cycle().take(n * r.len()).collect(),
            labels: vec![false; n],
            seed: 0,
        }
    }

    #[test]
    fn degenerate_test_set() {
        let test = constant_rows(&[0.1, -0.2], 5);
        let x = [0.25, 0.75];
        let xr = 0.25 * 0.1 - 0.75 * 0.2;
        let mv = MeanVar { gamma: 0.1 };
        assert!((evaluate_oos(&x, &test, &mv) + 0.1 * xr).abs() < 1e-15);
        let cv = MeanCVaR { rho: 10.0, p: 0.95 };
        assert!((evaluate_oos(&x, &test, &cv) - 11.0 * -xr).abs() < 1e-14);
    }

    #[test]
    fn fit_requires_both_regimes() {
        let data = constant_rows(&[0.1, 0.2], 10);
        let mv = MeanVar { gamma: 0.1 };
        let amb = AmbiguitySpec::point(0.03).unwrap();
        assert!(matches!(
            mv.fit(&data, amb.clone()),
            Err(Error::InsufficientData { regime: "stress", rows: 0, .. })
        ));
        assert!(MeanCVaR { rho: 1.0, p: 0.9 }.fit(&data, amb).is_err());
    }

    #[test]
    fn registry_builds_and_validates() {
        let spec: DisutilitySpec = serde_json::from_value(json!({"kind": "mean_cvar", "rho": 10.0, "p": 0.95})).unwrap();
        assert_eq!(build_disutility(&spec).unwrap().name(), "mean_cvar");
        let bad: DisutilitySpec = serde_json::from_value(json!({"kind": "mean_var", "gamma": 0.1, "rho": 1})).unwrap();
        assert!(build_disutility(&bad).is_err());
        let unknown: DisutilitySpec = serde_json::from_value(json!({"kind": "utility"})).unwrap();
        assert!(build_disutility(&unknown).is_err());
    }
}
