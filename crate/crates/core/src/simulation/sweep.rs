//! DRO-versus-SAA sweep over `(epsilon, c)`.
//!
//! Every replication draws one training set that all cells share, so the SAA
//! portfolio of a replication is solved once and the DRO-SAA comparison in
//! each cell is paired. One test set and one large truth sample serve the
//! whole sweep.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguitySpec, DEFAULT_CONCENTRATION};
use crate::error::{Error, Result};
use crate::solver::{fmt_float, solve, SolverConfig};

use super::disutility::{build_disutility, evaluate_oos, Disutility, DisutilitySpec};
use super::model::{derive_seed, sample_mixture, GeneratedDataset, RegimeModel};

const STREAM_TEST: u64 = 1;
const STREAM_TRUTH: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_SOLVER: u64 = 4;

fn default_name() -> String {
    "sweep".into()
}

fn default_concentration() -> f64 {
    DEFAULT_CONCENTRATION
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0, 0.01, 0.02, 0.03]
}

fn default_true_sample_size() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: RegimeModel,
    pub disutility: DisutilitySpec,
    pub q0: f64,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    pub c_values: Vec<f64>,
    pub replications: usize,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(default = "default_true_sample_size")]
    pub true_sample_size: usize,
    /// Solver for the DRO problems.
    pub solver: SolverConfig,
    /// Solver for the SAA and truth problems; defaults to `solver`.
    #[serde(default)]
    pub saa_solver: Option<SolverConfig>,
    /// Master seed; the command line overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.c_values.is_empty() || self.epsilons.is_empty() {
            return Err(Error::Config("c_values and epsilons must be non-empty".into()));
        }
        if self.replications == 0 || self.train_size == 0 || self.test_size == 0 || self.true_sample_size == 0 {
            return Err(Error::Config("replications and sample sizes must be at least 1".into()));
        }
        for &e in &self.epsilons {
            AmbiguitySpec::new(self.q0, e, 0.0, self.concentration).map_err(|e| Error::Config(e.to_string()))?;
        }
        for &c in &self.c_values {
            AmbiguitySpec::new(self.q0, 0.0, c, self.concentration).map_err(|e| Error::Config(e.to_string()))?;
        }
        build_disutility(&self.disutility)?;
        Ok(())
    }

    fn saa_solver(&self) -> &SolverConfig {
        self.saa_solver.as_ref().unwrap_or(&self.solver)
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.epsilons
            .iter()
            .flat_map(|&e| self.c_values.iter().map(move |&c| (e, c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub train_seed: u64,
    pub dro_oos: f64,
    pub saa_oos: f64,
    pub dro_objective: f64,
    pub dro_q: f64,
    pub dro_x: Vec<f64>,
    pub saa_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub completed: usize,
    pub dro_mean: f64,
    pub dro_p20: f64,
    pub dro_p80: f64,
    pub saa_mean: f64,
    pub saa_p20: f64,
    pub saa_p80: f64,
    pub dro_alloc: Vec<f64>,
    pub saa_alloc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub epsilon: f64,
    pub c: f64,
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<(usize, String)>,
    pub summary: CellSummary,
}

impl CellResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueBest {
    pub x: Vec<f64>,
    pub objective: f64,
    pub oos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub disutility: String,
    pub d: usize,
    pub seed: u64,
    pub cells: Vec<CellResult>,
    pub true_best: TrueBest,
}

/// Linear interpolation between order statistics at rank `(n - 1) p`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_vector(rows: impl Iterator<Item = Vec<f64>>, d: usize) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    let mut n = 0usize;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(&r) {
            *a += v;
        }
        n += 1;
    }
    acc.iter().map(|v| v / n.max(1) as f64).collect()
}

fn summarize(records: &[ReplicationRecord], d: usize) -> CellSummary {
    let dro: Vec<f64> = records.iter().map(|r| r.dro_oos).collect();
    let saa: Vec<f64> = records.iter().map(|r| r.saa_oos).collect();
    CellSummary {
        completed: records.len(),
        dro_mean: mean(&dro),
        dro_p20: percentile(&dro, 0.2),
        dro_p80: percentile(&dro, 0.8),
        saa_mean: mean(&saa),
        saa_p20: percentile(&saa, 0.2),
        saa_p80: percentile(&saa, 0.8),
        dro_alloc: mean_vector(records.iter().map(|r| r.dro_x.clone()), d),
        saa_alloc: mean_vector(records.iter().map(|r| r.saa_x.clone()), d),
    }
}

struct Replication {
    seed: u64,
    data: GeneratedDataset,
    saa: std::result::Result<(Vec<f64>, f64), String>,
}

fn solver_for(template: &SolverConfig, seed: u64) -> SolverConfig {
    SolverConfig { seed, record_trace: false, ..template.clone() }
}

/// Runs the sweep on the current rayon pool. Results do not depend on the
/// number of threads.
pub fn run_sweep(grid: &ExperimentGrid, master_seed: u64) -> Result<SweepResult> {
    grid.validate()?;
    let disutility = build_disutility(&grid.disutility)?;
    let d = grid.model.d;
    let test = sample_mixture(&grid.model, grid.test_size, derive_seed(master_seed, &[STREAM_TEST]))?;

    let truth_sample = sample_mixture(
        &grid.model,
        grid.true_sample_size,
        derive_seed(master_seed, &[STREAM_TRUTH]),
    )?;
    let truth_problem = disutility.truth(&grid.model, &truth_sample, grid.q0)?;
    let truth = solve(truth_problem.as_ref(), &solver_for(grid.saa_solver(), derive_seed(master_seed, &[STREAM_TRUTH])))?;
    let true_best = TrueBest {
        oos: evaluate_oos(&truth.x, &test, disutility.as_ref()),
        objective: truth.objective,
        x: truth.x.to_vec(),
    };
    drop(truth_sample);

    let replications: Vec<Replication> = (0..grid.replications)
        .into_par_iter()
        .map(|r| -> Result<Replication> {
            let seed = derive_seed(master_seed, &[STREAM_TRAIN, r as u64]);
            let data = sample_mixture(&grid.model, grid.train_size, seed)?;
            let saa = disutility
                .saa(&data, grid.q0)
                .and_then(|p| {
                    let cfg = solver_for(grid.saa_solver(), derive_seed(master_seed, &[STREAM_SOLVER, r as u64]));
                    solve(p.as_ref(), &cfg)
                })
                .map(|res| {
                    let oos = evaluate_oos(&res.x, &test, disutility.as_ref());
                    (res.x.to_vec(), oos)
                })
                .map_err(|e| e.to_string());
            Ok(Replication { seed, data, saa })
        })
        .collect::<Result<_>>()?;

    let cells = grid.cells();
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.replications).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<std::result::Result<ReplicationRecord, String>> = tasks
        .par_iter()
        .map(|&(cell, r)| {
            let (epsilon, c) = cells[cell];
            run_cell_replication(grid, disutility.as_ref(), &test, &replications[r], r, epsilon, c, master_seed)
        })
        .collect();

    let mut results = Vec::with_capacity(cells.len());
    for (cell, &(epsilon, c)) in cells.iter().enumerate() {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for r in 0..grid.replications {
            match &outcomes[cell * grid.replications + r] {
                Ok(rec) => records.push(rec.clone()),
                Err(e) => failures.push((r, e.clone())),
            }
        }
        let summary = summarize(&records, d);
        log::info!(
            "cell eps={epsilon} c={c}: {}/{} replications, DRO {:.6e} SAA {:.6e}",
            records.len(),
            grid.replications,
            summary.dro_mean,
            summary.saa_mean
        );
        results.push(CellResult { epsilon, c, records, failures, summary });
    }

    Ok(SweepResult {
        name: grid.name.clone(),
        disutility: disutility.name().to_string(),
        d,
        seed: master_seed,
        cells: results,
        true_best,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_cell_replication(
    grid: &ExperimentGrid,
    disutility: &dyn Disutility,
    test: &GeneratedDataset,
    rep: &Replication,
    r: usize,
    epsilon: f64,
    c: f64,
    master_seed: u64,
) -> std::result::Result<ReplicationRecord, String> {
    let (saa_x, saa_oos) = rep.saa.clone().map_err(|e| format!("SAA failed: {e}"))?;
    let ambiguity = AmbiguitySpec::new(grid.q0, epsilon, c, grid.concentration).map_err(|e| e.to_string())?;
    let problem = disutility.fit(&rep.data, ambiguity).map_err(|e| e.to_string())?;
    let cfg = solver_for(&grid.solver, derive_seed(master_seed, &[STREAM_SOLVER, r as u64]));
    let res = solve(problem.as_ref(), &cfg).map_err(|e| e.to_string())?;
    Ok(ReplicationRecord {
        replication: r,
        train_seed: rep.seed,
        dro_oos: evaluate_oos(&res.x, test, disutility),
        saa_oos,
        dro_objective: res.objective,
        dro_q: res.q_star,
        dro_x: res.x.to_vec(),
        saa_x,
    })
}

/// `{experiment}_{epsilon}_{c}.csv`.
pub fn cell_file_name(experiment: &str, epsilon: f64, c: f64) -> String {
    format!("{experiment}_{epsilon}_{c}.csv")
}

fn x_headers(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

pub fn write_summary_csv(result: &SweepResult, out: &mut impl Write) -> std::io::Result<()> {
    let d = result.d;
    let mut header: Vec<String> = [
        "epsilon", "c", "completed", "dro_mean", "dro_p20", "dro_p80", "saa_mean", "saa_p20", "saa_p80", "true_best",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(x_headers("dro_x", d));
    header.extend(x_headers("saa_x", d));
    writeln!(out, "{}", header.join(","))?;
    for cell in &result.cells {
        let s = &cell.summary;
        let mut row = vec![fmt_float(cell.epsilon), fmt_float(cell.c), s.completed.to_string()];
        row.extend(
            [s.dro_mean, s.dro_p20, s.dro_p80, s.saa_mean, s.saa_p20, s.saa_p80, result.true_best.oos]
                .iter()
                .map(|v| fmt_float(*v)),
        );
        row.extend(s.dro_alloc.iter().chain(&s.saa_alloc).map(|v| fmt_float(*v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_cell_csv(cell: &CellResult, d: usize, out: &mut impl Write) -> std::io::Result<()> {
    let mut header: Vec<String> = ["replication", "train_seed", "dro_oos", "saa_oos", "dro_objective", "dro_q"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(x_headers("dro_x", d));
    header.extend(x_headers("saa_x", d));
    writeln!(out, "{}", header.join(","))?;
    for r in &cell.records {
        let mut row = vec![r.replication.to_string(), r.train_seed.to_string()];
        row.extend([r.dro_oos, r.saa_oos, r.dro_objective, r.dro_q].iter().map(|v| fmt_float(*v)));
        row.extend(r.dro_x.iter().chain(&r.saa_x).map(|v| fmt_float(*v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
