//! Command implementations behind the `robust-alloc` binary.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::ambiguity::AmbiguitySpec;
use crate::config::{self, ConvergenceConfig, SolveConfig};
use crate::error::{Error, Result};
use crate::geometry::project_simplex;
use crate::meancvar::cvar_empirical;
use crate::meanvar::{MeanVarProblem, MomentSpec};
use crate::oracles;
use crate::simulation::sweep::{cell_file_name, write_cell_csv, write_summary_csv};
use crate::simulation::{run_convergence, run_sweep, ExperimentGrid};
use crate::solver::{solve, write_trace_csv, TraceRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericalFailure { .. } | Error::ReferenceQuality { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Creates `out` when its parent exists.
fn prepare_out_dir(out: &Path) -> Result<()> {
    if out.is_dir() {
        return Ok(());
    }
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Error::Config(format!(
            "output directory {} cannot be created: parent does not exist",
            out.display()
        )));
    }
    fs::create_dir(out)?;
    Ok(())
}

fn write_file(path: PathBuf, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_path: String,
    seed: u64,
    config: Value,
    outputs: Vec<String>,
    elapsed_seconds: f64,
    details: Value,
}

fn manifest(
    command: &str,
    config_path: &Path,
    seed: u64,
    config: &impl Serialize,
    outputs: Vec<String>,
    started: Instant,
    details: Value,
) -> Manifest<'static> {
    Manifest {
        command: match command {
            "solve" => "solve",
            "experiment" => "experiment",
            "convergence" => "convergence",
            _ => "unknown",
        },
        version: env!("CARGO_PKG_VERSION"),
        config_path: config_path.display().to_string(),
        seed,
        config: serde_json::to_value(config).unwrap_or(Value::Null),
        outputs,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        details,
    }
}

fn report(result: Result<()>, out: &Path) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(Error::NumericalFailure { iteration, message, trace }) => {
            eprintln!("error: numerical failure at iteration {iteration}: {message}");
            if !trace.is_empty() && out.is_dir() {
                let d = trace[0].x.len();
                let path = out.join("failure_trace.csv");
                if write_file(path.clone(), |w| write_trace_csv(&trace, d, w)).is_ok() {
                    eprintln!("trace written to {}", path.display());
                }
            }
            EXIT_NUMERICAL
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn trace_of(rows: &[TraceRow]) -> usize {
    rows.first().map(|r| r.x.len()).unwrap_or(0)
}

pub fn cmd_solve(config_path: &Path, seed: Option<u64>, out: &Path) -> i32 {
    let started = Instant::now();
    let result = (|| -> Result<()> {
        let cfg: SolveConfig = config::load(config_path)?;
        let seed = seed.or(cfg.seed).unwrap_or(0);
        let problem = cfg.problem.build(seed)?;
        prepare_out_dir(out)?;
        let solver = crate::solver::SolverConfig { seed, ..cfg.solver.clone() };
        let res = solve(problem.as_ref(), &solver)?;
        let solution = json!({
            "kind": problem.kind(),
            "x": res.x,
            "aux": res.aux,
            "objective": res.objective,
            "q_star": res.q_star,
            "last_iterate": {"x": res.last_x, "aux": res.last_aux, "objective": res.last_objective},
            "iterations": res.iterations,
            "schedule": res.schedule,
            "averaging": res.averaging,
            "warnings": res.warnings,
        });
        write_json(out.join("solution.json"), &solution)?;
        write_file(out.join("trace.csv"), |w| write_trace_csv(&res.trace, trace_of(&res.trace), w))?;
        let m = manifest(
            "solve",
            config_path,
            seed,
            &cfg,
            vec!["solution.json".into(), "trace.csv".into()],
            started,
            Value::Null,
        );
        write_json(out.join("manifest.json"), &m)?;
        log::info!("J* = {:.12e} after {} iterations", res.objective, res.iterations);
        Ok(())
    })();
    report(result, out)
}

pub fn cmd_convergence(config_path: &Path, seed: Option<u64>, out: &Path) -> i32 {
    let started = Instant::now();
    let result = (|| -> Result<()> {
        let cfg: ConvergenceConfig = config::load(config_path)?;
        let seed = seed.or(cfg.seed).unwrap_or(0);
        let problem = cfg.problem.build(seed)?;
        prepare_out_dir(out)?;
        let solver = crate::solver::SolverConfig { seed, ..cfg.solver.clone() };
        let conv = run_convergence(problem.as_ref(), &solver, &cfg.reference)?;
        let trace_name = format!("{}_trace.csv", cfg.name);
        let rows = &conv.solve.trace;
        write_file(out.join(&trace_name), |w| write_trace_csv(rows, trace_of(rows), w))?;
        let details = json!({
            "reference": conv.reference,
            "warnings": conv.solve.warnings,
            "schedule": conv.solve.schedule,
        });
        let m = manifest("convergence", config_path, seed, &cfg, vec![trace_name], started, details);
        write_json(out.join("manifest.json"), &m)?;
        Ok(())
    })();
    report(result, out)
}

pub fn cmd_experiment(config_path: &Path, seed: Option<u64>, out: &Path, jobs: Option<usize>) -> i32 {
    let started = Instant::now();
    let result = (|| -> Result<()> {
        let grid: ExperimentGrid = config::load(config_path)?;
        grid.validate()?;
        let seed = seed.or(grid.seed).unwrap_or(0);
        prepare_out_dir(out)?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            builder = builder.num_threads(j.max(1));
        }
        let pool = builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let sweep = pool.install(|| run_sweep(&grid, seed))?;

        let mut outputs = Vec::new();
        let summary = format!("{}_summary.csv", grid.name);
        write_file(out.join(&summary), |w| write_summary_csv(&sweep, w))?;
        outputs.push(summary);
        for cell in &sweep.cells {
            let name = cell_file_name(&grid.name, cell.epsilon, cell.c);
            write_file(out.join(&name), |w| write_cell_csv(cell, sweep.d, w))?;
            outputs.push(name);
        }
        let incomplete: Vec<Value> = sweep
            .cells
            .iter()
            .filter(|c| !c.is_complete())
            .map(|c| json!({"epsilon": c.epsilon, "c": c.c, "failures": c.failures}))
            .collect();
        let details = json!({
            "true_best": sweep.true_best,
            "incomplete_cells": incomplete,
            "jobs": pool.current_num_threads(),
            "seed_derivation": "SplitMix64 chain over (master seed, stream, replication)",
        });
        let m = manifest("experiment", config_path, seed, &grid, outputs, started, details);
        write_json(out.join("manifest.json"), &m)?;
        Ok(())
    })();
    report(result, out)
}

fn check(name: &str, value: f64, limit: f64) -> bool {
    let ok = value <= limit;
    println!("{} {name}: {value:.3e} (limit {limit:.0e})", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Quick cross-checks of the fast paths against the oracles.
pub fn cmd_selftest(seed: Option<u64>) -> i32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let mut all = true;

    let mut worst = 0.0f64;
    for _ in 0..300 {
        let d = rng.random_range(2..=8);
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fast = project_simplex(&y).expect("finite input");
        let slow = oracles::qp_projection_oracle(&y).expect("small dimension");
        worst = worst.max(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    all &= check("simplex projection vs support enumeration", worst, 1e-9);

    let problem = selftest_problem();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = random_simplex(&mut rng, 3);
        let a = rng.random_range(-0.5..0.5);
        let q = rng.random_range(0.0..1.0);
        let fast = problem.v_worst(q, &x, a);
        let slow = oracles::v_worst_oracle(&problem, q, &x, a);
        worst = worst.max((fast - slow).abs() / slow.abs().max(1e-12));
    }
    all &= check("worst-case V vs numeric dual", worst, 1e-7);

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..60);
        let losses: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = rng.random_range(0.05..0.95);
        worst = worst.max((cvar_empirical(&losses, p) - oracles::cvar_grid_oracle(&losses, p)).abs());
    }
    all &= check("empirical CVaR vs Rockafellar grid", worst, 1e-9);

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = random_simplex(&mut rng, 3);
        let a = rng.random_range(-0.3..0.3);
        let q = problem.q_interval().midpoint();
        let (gx, ga) = problem.h_gradient(q, &x, a);
        let mut grad = gx;
        grad.push(ga);
        let mut z = x.clone();
        z.push(a);
        let f = |z: &[f64]| problem.h_objective(q, &z[..3], z[3]);
        worst = worst.max(oracles::finite_difference_check(&f, &grad, &z, 1e-6));
    }
    all &= check("Mean-Var gradient vs finite differences", worst, 1e-5);

    if all {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

fn random_simplex(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn selftest_problem() -> MeanVarProblem {
    let normal = MomentSpec::from_rows(
        vec![0.03, 0.06, 0.09],
        vec![vec![0.001, 0.0004, 0.0004], vec![0.0004, 0.0029, 0.0004], vec![0.0004, 0.0004, 0.006]],
    )
    .expect("positive definite");
    let stress = MomentSpec::from_rows(
        vec![-0.1, -0.15, -0.2],
        vec![vec![0.028, 0.014, 0.016], vec![0.014, 0.035, 0.019], vec![0.016, 0.019, 0.043]],
    )
    .expect("positive definite");
    let amb = AmbiguitySpec::new(0.2, 0.05, 0.5, 10.0).expect("valid ambiguity");
    MeanVarProblem::new(0.1, normal, stress, amb).expect("valid problem")
}
