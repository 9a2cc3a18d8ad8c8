//! Projected subgradient descent on `J(x, aux) = max_q h(q, x, aux)`.
//!
//! Each step finds the worst-case weight, takes a subgradient step in
//! `(x, aux)`, projects `x` onto the simplex and clamps `aux` to its
//! interval.

pub mod averaging;
pub mod constants;
pub mod reference;
pub mod schedule;

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ambiguity::Warning;
use crate::error::{Error, Result};
use crate::geometry::{project_simplex, SimplexPoint};
use crate::objective::MinimaxObjective;

pub use averaging::{averaging_schemes, Averaging};
pub use constants::{estimate_constants, SmoothnessConstants};
pub use reference::{reference_optimum, ReferenceOptimum, ReferencePolicy};
pub use schedule::{schedules, ScheduleContext, ScheduleSpec, StepSchedule};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub iterations: usize,
    pub schedule: ScheduleSpec,
    /// Falls back to the pairing the schedule's guarantee is stated for.
    #[serde(default)]
    pub averaging: Option<String>,
    #[serde(default)]
    pub initial_x: Option<SimplexPoint>,
    #[serde(default)]
    pub initial_aux: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub record_trace: bool,
}

impl SolverConfig {
    pub fn new(iterations: usize, schedule: ScheduleSpec) -> Self {
        SolverConfig {
            iterations,
            schedule,
            averaging: None,
            initial_x: None,
            initial_aux: None,
            seed: 0,
            record_trace: true,
        }
    }

    pub fn averaging(mut self, name: &str) -> Self {
        self.averaging = Some(name.to_string());
        self
    }

    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }
}

/// One iterate `z_k` with its worst-case weight and objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub q: f64,
    pub value: f64,
    pub gap: Option<f64>,
    pub x: Vec<f64>,
    pub aux: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: SimplexPoint,
    pub aux: f64,
    pub objective: f64,
    pub q_star: f64,
    pub last_x: SimplexPoint,
    pub last_aux: f64,
    pub last_objective: f64,
    pub iterations: usize,
    pub schedule: Value,
    pub averaging: String,
    pub warnings: Vec<Warning>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    /// Fills the gap column relative to `reference`.
    pub fn set_gaps(&mut self, reference: f64) {
        for row in &mut self.trace {
            row.gap = Some(row.value - reference);
        }
    }
}

pub fn initial_point(objective: &dyn MinimaxObjective, config: &SolverConfig) -> Result<(SimplexPoint, f64)> {
    let d = objective.dim();
    let x = match &config.initial_x {
        Some(x) if x.dim() != d => {
            return Err(Error::invalid(format!(
                "initial point has {} weights, problem has {d} assets",
                x.dim()
            )))
        }
        Some(x) => x.clone(),
        None => SimplexPoint::uniform(d),
    };
    let interval = objective.aux_interval();
    let aux = match config.initial_aux {
        Some(a) if !interval.contains(a) => {
            return Err(Error::invalid(format!(
                "initial auxiliary value {a} outside [{}, {}]",
                interval.lo, interval.hi
            )))
        }
        Some(a) => a,
        None => objective.aux_domain().midpoint(),
    };
    Ok((x, aux))
}

pub fn solve(objective: &dyn MinimaxObjective, config: &SolverConfig) -> Result<SolveResult> {
    let ctx = ScheduleContext {
        objective,
        iterations: config.iterations,
        seed: config.seed,
    };
    let schedule = (schedules().get(&config.schedule.kind)?)(&config.schedule, &ctx)?;
    let averaging_name = config
        .averaging
        .clone()
        .unwrap_or_else(|| schedule.default_averaging().to_string());
    let averaging = (averaging_schemes().get(&averaging_name)?)();
    let (x0, aux0) = initial_point(objective, config)?;
    run(objective, config, schedule.as_ref(), averaging.as_ref(), x0, aux0)
}

/// The iteration itself, for callers that build strategies directly.
pub fn run(
    objective: &dyn MinimaxObjective,
    config: &SolverConfig,
    schedule: &dyn StepSchedule,
    averaging: &dyn Averaging,
    x0: SimplexPoint,
    aux0: f64,
) -> Result<SolveResult> {
    let t = config.iterations;
    let d = objective.dim();
    let interval = objective.aux_domain();
    let mut x = x0;
    let mut aux = aux0;
    let mut trace = Vec::with_capacity(if config.record_trace { t + 1 } else { 0 });
    let mut acc_x = vec![0.0; d];
    let mut acc_aux = 0.0;
    let mut best: Option<(f64, usize)> = None;
    let mut best_point: (Vec<f64>, f64) = (Vec::new(), aux0);
    let mut track = |k: usize, value: f64, x: &[f64], aux: f64| {
        if averaging.selects_best() && best.map_or(true, |(v, _)| value < v) {
            best = Some((value, k));
            best_point = (x.to_vec(), aux);
        }
    };
    let mut accumulate = |k: usize, x: &[f64], aux: f64| {
        let w = averaging.weight(k, t);
        if w != 0.0 {
            for (a, v) in acc_x.iter_mut().zip(x) {
                *a += w * v;
            }
            acc_aux += w * aux;
        }
    };

    for k in 0..t {
        let sg = objective.subgradient(&x, aux);
        if config.record_trace {
            trace.push(TraceRow { k, q: sg.q, value: sg.value, gap: None, x: x.to_vec(), aux });
        }
        if !sg.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: k,
                message: "non-finite subgradient".into(),
                trace,
            });
        }
        accumulate(k, &x, aux);
        track(k, sg.value, &x, aux);
        let eta = schedule.step(k + 1);
        let y: Vec<f64> = x.iter().zip(&sg.g_x).map(|(xi, gi)| xi - eta * gi).collect();
        x = match project_simplex(&y) {
            Ok(p) => p,
            Err(e) => {
                return Err(Error::NumericalFailure {
                    iteration: k,
                    message: format!("projection failed: {e}"),
                    trace,
                })
            }
        };
        aux = interval.clamp(aux - eta * sg.g_aux);
    }

    let last = objective.worst_q(&x, aux);
    if config.record_trace {
        trace.push(TraceRow { k: t, q: last.q, value: last.value, gap: None, x: x.to_vec(), aux });
    }
    if !last.value.is_finite() {
        return Err(Error::NumericalFailure {
            iteration: t,
            message: "non-finite objective".into(),
            trace,
        });
    }
    accumulate(t, &x, aux);
    track(t, last.value, &x, aux);

    let (avg_x, avg_aux) = if best.is_some() {
        (SimplexPoint::new(best_point.0)?, best_point.1)
    } else {
        // Weights sum to one; re-projecting removes rounding drift.
        (project_simplex(&acc_x)?, interval.clamp(acc_aux))
    };
    let best = objective.worst_q(&avg_x, avg_aux);
    Ok(SolveResult {
        x: avg_x,
        aux: avg_aux,
        objective: best.value,
        q_star: best.q,
        last_x: x,
        last_aux: aux,
        last_objective: last.value,
        iterations: t,
        schedule: schedule.describe(),
        averaging: averaging.name().to_string(),
        warnings: objective.warnings(),
        trace,
    })
}

/// Writes `k,q,value,gap,x_1..x_d,aux` with 17 significant digits.
pub fn write_trace_csv(rows: &[TraceRow], dim: usize, out: &mut impl Write) -> std::io::Result<()> {
    let mut header = vec!["k".to_string(), "q".into(), "value".into(), "gap".into()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.push("aux".into());
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let mut cells = vec![r.k.to_string(), fmt_float(r.q), fmt_float(r.value)];
        cells.push(r.gap.map(fmt_float).unwrap_or_default());
        cells.extend(r.x.iter().map(|v| fmt_float(*v)));
        cells.push(fmt_float(r.aux));
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::AmbiguitySpec;
    use crate::meanvar::{MeanVarProblem, MomentSpec};

    fn problem() -> MeanVarProblem {
        let n = MomentSpec::from_rows(vec![0.03, 0.06], vec![vec![0.0008, 0.0004], vec![0.0004, 0.0029]]).unwrap();
        let s = MomentSpec::from_rows(vec![-0.1, -0.15], vec![vec![0.0169, 0.0106], vec![0.0106, 0.0256]]).unwrap();
        MeanVarProblem::new(0.1, n, s, AmbiguitySpec::new(0.03, 0.01, 0.1, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_iterations_returns_start() {
        let p = problem();
        let cfg = SolverConfig::new(0, ScheduleSpec::fixed(0.1));
        let r = solve(&p, &cfg).unwrap();
        assert_eq!(r.x.as_slice(), &[0.5, 0.5]);
        assert_eq!(r.aux, p.a_interval().midpoint());
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.objective, p.j_value(&[0.5, 0.5], r.aux));
    }

    #[test]
    fn iterates_stay_feasible_and_deterministic() {
        let p = problem();
        let cfg = SolverConfig::new(200, ScheduleSpec::named("strongly_convex"));
        let a = solve(&p, &cfg).unwrap();
        let b = solve(&p, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 201);
        for row in &a.trace {
            assert!((row.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.x.iter().all(|v| *v >= 0.0));
            assert!(p.a_interval().contains(row.aux));
        }
        assert_eq!(a.averaging, "weighted_k");
    }

    #[test]
    fn best_iterate_is_trace_minimum() {
        let p = problem();
        let cfg = SolverConfig::new(300, ScheduleSpec::fixed(0.5)).averaging("best_iterate");
        let r = solve(&p, &cfg).unwrap();
        let min = r.trace.iter().map(|row| row.value).fold(f64::INFINITY, f64::min);
        assert_eq!(r.objective, min);
        assert!(r.objective <= r.last_objective);
    }

    #[test]
    fn rejects_bad_initial_point() {
        let p = problem();
        let mut cfg = SolverConfig::new(5, ScheduleSpec::fixed(0.1));
        cfg.initial_x = Some(SimplexPoint::uniform(3));
        assert!(solve(&p, &cfg).is_err());
        cfg.initial_x = None;
        cfg.initial_aux = Some(1e6);
        assert!(solve(&p, &cfg).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let rows = vec![TraceRow { k: 0, q: 0.5, value: 1.0, gap: Some(0.25), x: vec![0.5, 0.5], aux: 0.0 }];
        let mut buf = Vec::new();
        write_trace_csv(&rows, 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,q,value,gap,x1,x2,aux");
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), 7);
        assert_eq!(cells[3].parse::<f64>().unwrap(), 0.25);
    }
}
