//! JSON run configurations.
//!
//! ```json
//! {
//!   "problem": {
//!     "kind": "mean_var_model",
//!     "gamma": 0.1,
//!     "model": {"d": 10},
//!     "ambiguity": {"q0": 0.024, "epsilon": 0.03, "c": 0.1}
//!   },
//!   "solver": {"iterations": 2000, "schedule": {"kind": "fixed", "eta": 0.001}}
//! }
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguitySpec, DEFAULT_CONCENTRATION};
use crate::error::{Error, Result};
use crate::meancvar::{MeanCVaRProblem, SampleSet};
use crate::meanvar::{MeanVarProblem, MomentSpec};
use crate::objective::MinimaxObjective;
use crate::simulation::model::{derive_seed, sample_mixture, RegimeModel};
use crate::solver::{ReferencePolicy, SolverConfig};

fn default_concentration() -> f64 {
    DEFAULT_CONCENTRATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguityConfig {
    pub q0: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
}

impl AmbiguityConfig {
    pub fn build(&self) -> Result<AmbiguitySpec> {
        AmbiguitySpec::new(self.q0, self.epsilon, self.c, self.concentration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Explicit regime moments.
    MeanVar {
        gamma: f64,
        normal: MomentSpec,
        stress: MomentSpec,
        ambiguity: AmbiguityConfig,
    },
    /// Explicit regime samples.
    MeanCvar {
        rho: f64,
        p: f64,
        normal: SampleSet,
        stress: SampleSet,
        ambiguity: AmbiguityConfig,
    },
    /// Exact moments of the two-regime generative model.
    MeanVarModel {
        gamma: f64,
        model: RegimeModel,
        ambiguity: AmbiguityConfig,
    },
    /// Labelled samples drawn from the generative model with the run seed.
    MeanCvarModel {
        rho: f64,
        p: f64,
        model: RegimeModel,
        samples: usize,
        ambiguity: AmbiguityConfig,
    },
}

impl ProblemConfig {
    pub fn build(&self, seed: u64) -> Result<Box<dyn MinimaxObjective>> {
        Ok(match self {
            ProblemConfig::MeanVar { gamma, normal, stress, ambiguity } => Box::new(MeanVarProblem::new(
                *gamma,
                normal.clone(),
                stress.clone(),
                ambiguity.build()?,
            )?),
            ProblemConfig::MeanCvar { rho, p, normal, stress, ambiguity } => Box::new(MeanCVaRProblem::new(
                *rho,
                *p,
                normal.clone(),
                stress.clone(),
                ambiguity.build()?,
            )?),
            ProblemConfig::MeanVarModel { gamma, model, ambiguity } => Box::new(MeanVarProblem::new(
                *gamma,
                model.normal_moments()?,
                model.stress_moments()?,
                ambiguity.build()?,
            )?),
            ProblemConfig::MeanCvarModel { rho, p, model, samples, ambiguity } => {
                let data = sample_mixture(model, *samples, derive_seed(seed, &[0]))?;
                let normal = data.regime(false).ok_or(Error::InsufficientData {
                    regime: "normal",
                    rows: 0,
                    needed: 1,
                })?;
                let stress = data.regime(true).ok_or(Error::InsufficientData {
                    regime: "stress",
                    rows: 0,
                    needed: 1,
                })?;
                Box::new(MeanCVaRProblem::new(*rho, *p, normal, stress, ambiguity.build()?)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_convergence_name")]
    pub name: String,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub reference: ReferencePolicy,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_convergence_name() -> String {
    "convergence".into()
}

/// Parses `text`; errors carry the line and column serde reports.
pub fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: cannot read: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_model_problem() {
        let text = r#"{
            "problem": {"kind": "mean_var_model", "gamma": 0.1, "model": {"d": 3},
                        "ambiguity": {"q0": 0.024, "epsilon": 0.03, "c": 0.1}},
            "solver": {"iterations": 10, "schedule": {"kind": "fixed", "eta": 0.001}}
        }"#;
        let cfg: SolveConfig = parse(text, "inline").unwrap();
        let p = cfg.problem.build(0).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.warnings().len(), 1);
    }

    #[test]
    fn rejects_unknown_keys_with_position() {
        let text = "{\n  \"problem\": {\"kind\": \"mean_var_model\", \"gamma\": 0.1, \"model\": {\"d\": 3},\n  \"ambiguity\": {\"q0\": 0.1}, \"extra\": 1},\n  \"solver\": {\"iterations\": 1, \"schedule\": {\"kind\": \"fixed\", \"eta\": 0.1}}\n}";
        let err = parse::<SolveConfig>(text, "cfg.json").unwrap_err().to_string();
        assert!(err.contains("cfg.json:3:"), "{err}");
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn rejects_malformed_json() {
        assert!(matches!(parse::<SolveConfig>("{", "x"), Err(Error::Config(_))));
    }
}
