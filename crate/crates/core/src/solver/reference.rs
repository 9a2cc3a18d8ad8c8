//! Reference optimum `J*` for suboptimality-gap traces.
//!
//! `J*` is the least objective found by a long strongly convex (or, without
//! a curvature bound, Lipschitz) run, a long continuation of the subject
//! schedule, and the grid oracle when the dimension is small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::MinimaxObjective;
use crate::oracles::{grid_minimize, GridSpec};

use super::{solve, ScheduleSpec, SolveResult, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferencePolicy {
    /// Reference runs use this many times the subject's iterations.
    pub multiplier: usize,
    /// Floor on the reference iteration count.
    pub min_iterations: usize,
    /// Use the grid oracle when the dimension allows it.
    pub grid_check: bool,
    pub grid_resolution: usize,
    pub grid_refinements: usize,
    /// Gaps below `-tolerance` mean the reference is not good enough.
    pub tolerance: f64,
    /// Reruns with a four times larger budget before giving up.
    pub retries: usize,
}

impl Default for ReferencePolicy {
    fn default() -> Self {
        ReferencePolicy {
            multiplier: 10,
            min_iterations: 1000,
            grid_check: true,
            grid_resolution: 100,
            grid_refinements: 30,
            tolerance: 1e-8,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceOptimum {
    pub value: f64,
    pub x: Vec<f64>,
    pub aux: f64,
    pub source: String,
    /// Every candidate considered, by source.
    pub candidates: Vec<(String, f64)>,
}

struct Candidates {
    list: Vec<(String, f64, Vec<f64>, f64)>,
}

impl Candidates {
    fn add_run(&mut self, label: &str, r: &SolveResult) {
        self.list.push((format!("{label}/average"), r.objective, r.x.to_vec(), r.aux));
        self.list.push((format!("{label}/last"), r.last_objective, r.last_x.to_vec(), r.last_aux));
    }
}

pub fn reference_optimum(
    objective: &dyn MinimaxObjective,
    subject: &SolverConfig,
    policy: &ReferencePolicy,
) -> Result<ReferenceOptimum> {
    let iterations = (subject.iterations * policy.multiplier).max(policy.min_iterations);
    let mut c = Candidates { list: Vec::new() };

    let long = if objective.strong_convexity().is_some() {
        SolverConfig::new(iterations, ScheduleSpec::named("strongly_convex")).averaging("weighted_k")
    } else {
        SolverConfig::new(iterations, ScheduleSpec::named("lipschitz")).averaging("uniform")
    };
    let long = SolverConfig { seed: subject.seed, ..long.without_trace() };
    c.add_run(&long.schedule.kind.clone(), &solve(objective, &long)?);

    let continuation = SolverConfig {
        iterations,
        record_trace: false,
        ..subject.clone()
    };
    c.add_run("continuation", &solve(objective, &continuation)?);

    if policy.grid_check && objective.dim() <= 3 {
        let spec = GridSpec::new(policy.grid_resolution, objective.aux_domain())
            .refinements(policy.grid_refinements);
        let best = grid_minimize(&|x: &[f64], a: f64| objective.value(x, a), objective.dim(), &spec)?;
        c.list.push(("grid".into(), best.value, best.x, best.aux));
    }

    let (source, value, x, aux) = c
        .list
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("at least one candidate");
    Ok(ReferenceOptimum {
        value,
        x,
        aux,
        source,
        candidates: c.list.into_iter().map(|(s, v, _, _)| (s, v)).collect(),
    })
}

/// Computes `J*`, fills the gap column of `result`, and retries with a
/// larger reference budget while some iterate beats the reference.
pub fn attach_gaps(
    objective: &dyn MinimaxObjective,
    subject: &SolverConfig,
    result: &mut SolveResult,
    policy: &ReferencePolicy,
) -> Result<ReferenceOptimum> {
    let mut policy = policy.clone();
    let mut attempt = 0;
    loop {
        let reference = reference_optimum(objective, subject, &policy)?;
        let worst = result
            .trace
            .iter()
            .map(|r| (r.k, r.value - reference.value))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            Some((k, gap)) if gap < -policy.tolerance => {
                if attempt >= policy.retries {
                    return Err(Error::ReferenceQuality { iteration: k, excess: -gap });
                }
                log::warn!("iterate {k} beats the reference by {:e}; enlarging the reference run", -gap);
                attempt += 1;
                policy.multiplier *= 4;
                policy.min_iterations *= 4;
            }
            _ => {
                result.set_gaps(reference.value);
                return Ok(reference);
            }
        }
    }
}
