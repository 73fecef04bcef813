//! End-to-end evolution of an initial guess with per-sample diagnostics.

use crate::diagnostics::{calibrate_lyapunov, DiagnosticsRecord, LyapunovConfig};
use crate::error::{Error, Result};
use crate::evolution::{evaluate, EvolutionOptions, SolutionState};
use crate::integrator::{integrate, IntegratorConfig};
use crate::multipliers::GainSet;
use crate::problem::{ProblemDef, Vector};

/// Trajectory at a requested variation time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub tau: f64,
    /// Node times.
    pub t: Vec<f64>,
    pub state: SolutionState,
    pub xdot: Vec<Vector>,
    pub e_f_norm: Vec<f64>,
}

#[derive(Debug)]
pub struct SolveOutput {
    pub state: SolutionState,
    pub history: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub lyapunov: LyapunovConfig,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Set when the integration stopped early; the other fields then hold the
    /// partial run.
    pub error: Option<Error>,
}

#[derive(Debug, Clone)]
pub struct SolveSettings {
    pub gains: GainSet,
    pub options: EvolutionOptions,
    pub integrator: IntegratorConfig,
    pub snapshot_taus: Vec<f64>,
}

/// Evolve `initial` to `τ = tau_max`.
pub fn solve(problem: &ProblemDef, initial: &SolutionState, settings: &SolveSettings) -> Result<SolveOutput> {
    settings.gains.validate(problem)?;
    settings.integrator.validate()?;
    initial.check(problem)?;
    let nodes = initial.nodes();
    let gains = &settings.gains;
    let options = settings.options;

    let first = evaluate(problem, initial, gains, options)?;
    let lyapunov = calibrate_lyapunov(problem, &first, gains);

    let half_sample = 0.5 * settings.integrator.sample_interval;
    let mut pending: Vec<f64> = settings
        .snapshot_taus
        .iter()
        .copied()
        .filter(|&t| t >= 0.0 && t <= settings.integrator.tau_max + half_sample)
        .collect();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut snapshots = Vec::new();

    let rhs = |_tau: f64, y: &Vector| {
        let state = SolutionState::unpack(problem, nodes, y)?;
        Ok(evaluate(problem, &state, gains, options)?.derivative.pack(problem))
    };
    let on_sample = |tau: f64, y: &Vector| {
        let state = SolutionState::unpack(problem, nodes, y)?;
        let ev = evaluate(problem, &state, gains, options)?;
        let record = DiagnosticsRecord::from_evaluation(tau, problem, &state, &ev, &lyapunov)?;
        while let Some(&next) = pending.first() {
            if next > tau + half_sample {
                break;
            }
            pending.remove(0);
            snapshots.push(Snapshot {
                tau: next,
                t: ev.grid().t.clone(),
                e_f_norm: ev.bundle.e_f.iter().map(|e| e.norm()).collect(),
                xdot: ev.bundle.xdot.clone(),
                state: state.clone(),
            });
        }
        Ok(record)
    };
    let run = integrate(rhs, &initial.pack(problem), &settings.integrator, on_sample);
    Ok(SolveOutput {
        state: SolutionState::unpack(problem, nodes, &run.y)?,
        history: run.samples,
        snapshots,
        lyapunov,
        accepted_steps: run.accepted_steps,
        rejected_steps: run.rejected_steps,
        error: run.error,
    })
}
