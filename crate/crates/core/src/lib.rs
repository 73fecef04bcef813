//! Variation evolving solver for optimal control problems.
//!
//! A candidate trajectory (possibly infeasible) is evolved in a virtual time
//! `τ` by an ODE whose equilibrium is the optimal solution. The crate
//! provides the problem definition, the discretized evolution right-hand
//! side, an adaptive integrator and per-sample diagnostics, plus a batch
//! front end that writes CSV histories.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod integrator;
pub mod mesh;
pub mod multipliers;
pub mod problem;
pub mod solver;
pub mod transition;

pub use diagnostics::{DiagnosticsRecord, LyapunovConfig};
pub use error::{Error, Result};
pub use evolution::{evaluate, evolution_rhs, Evaluation, EvolutionOptions, SensitivityBundle, SolutionState, StateDerivative};
pub use integrator::{integrate, IntegratorConfig};
pub use multipliers::{solve_active_set, GainSet, MultiplierResult};
pub use problem::{builtin, builtin_brachistochrone, builtin_double_integrator, FinalTime, Matrix, ProblemDef, Vector};
pub use solver::{solve, SolveOutput, SolveSettings, Snapshot};
