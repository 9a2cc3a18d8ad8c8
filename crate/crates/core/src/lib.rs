//! Distributionally robust portfolio selection under mixture ambiguity.
//!
//! Returns follow `(1 - q) P_N + q P_S` with the stress weight `q` known only
//! up to an interval and the stress distribution `P_S` known only up to a
//! Wasserstein ball whose radius depends on `q`. The crate solves the
//! worst-case Mean-Variance and Mean-CVaR problems by projected subgradient
//! descent on their min-max reformulations and runs the two-regime
//! simulation study comparing them with sample average approximation.

pub mod ambiguity;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod interval;
pub mod meancvar;
pub mod meanvar;
pub mod objective;
pub mod oracles;
pub mod qsearch;
pub mod registry;
pub mod simulation;
pub mod solver;

pub use ambiguity::{AmbiguitySpec, RadiusFunction, Warning};
pub use error::{Error, Result};
pub use geometry::{inf_norm_subgradient, project_simplex, SimplexPoint};
pub use interval::{clamp_interval, Interval};
pub use meancvar::{cvar_empirical, loss, MeanCVaRProblem, SampleSet};
pub use meanvar::{psi, MeanVarProblem, MomentSpec};
pub use objective::{MinimaxObjective, Subgradient};
pub use solver::{solve, SolveResult, SolverConfig};
