//! Two-regime simulation study: data generation, fitting, the DRO-versus-SAA
//! sweep and convergence traces.

pub mod disutility;
pub mod model;
pub mod sweep;

use crate::error::Result;
use crate::objective::MinimaxObjective;
use crate::solver::reference::attach_gaps;
use crate::solver::{solve, ReferenceOptimum, ReferencePolicy, SolveResult, SolverConfig};

pub use disutility::{build_disutility, disutilities, evaluate_oos, Disutility, DisutilitySpec};
pub use model::{derive_seed, sample_mixture, sample_moments, GeneratedDataset, RegimeModel, StressMatrixReading};
pub use sweep::{run_sweep, CellResult, ExperimentGrid, SweepResult};

#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub solve: SolveResult,
    pub reference: ReferenceOptimum,
}

/// Solves with a recorded trace and fills in `J(z_k) - J*`.
pub fn run_convergence(
    objective: &dyn MinimaxObjective,
    solver: &SolverConfig,
    policy: &ReferencePolicy,
) -> Result<ConvergenceResult> {
    let config = SolverConfig { record_trace: true, ..solver.clone() };
    let mut result = solve(objective, &config)?;
    let reference = attach_gaps(objective, &config, &mut result, policy)?;
    Ok(ConvergenceResult { solve: result, reference })
}
