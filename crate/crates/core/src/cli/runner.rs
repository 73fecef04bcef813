//! Drive one configured run and write its artifacts.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::evolution::EvolutionOptions;
use crate::solver::{solve, SolveOutput, SolveSettings};

use super::config::RunSpec;
use super::output::{emit_csv, history_table, snapshot_file_name, snapshot_table, summary_table};

#[derive(Debug)]
pub struct RunReport {
    pub output: SolveOutput,
    pub files: Vec<PathBuf>,
}

/// Integrate and write `history.csv`, one `snapshot_<tau>.csv` per requested
/// sample and `final_summary.csv`. Files are written even when the
/// integration stops early; the error is returned afterwards.
pub fn run(spec: &RunSpec) -> Result<RunReport> {
    let problem = &spec.problem;
    let initial = spec.initial_state()?;
    let settings = SolveSettings {
        gains: spec.gains.clone(),
        options: EvolutionOptions {
            mesh_convection: spec.mesh_convection,
        },
        integrator: spec.integrator,
        snapshot_taus: spec.snapshot_taus.clone(),
    };
    let mut output = solve(problem, &initial, &settings)?;

    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let history = dir.join("history.csv");
    emit_csv(&history_table(&output.history, problem.q_eq, problem.q_ineq), &history)?;
    files.push(history);
    for snapshot in &output.snapshots {
        let path = dir.join(snapshot_file_name(snapshot.tau));
        emit_csv(&snapshot_table(snapshot, problem.n, problem.m), &path)?;
        files.push(path);
    }
    let summary = dir.join("final_summary.csv");
    emit_csv(&summary_table(&output, problem.q_eq, problem.q_ineq), &summary)?;
    files.push(summary);

    if let Some(err) = output.error.take() {
        return Err(err.in_stage("integration"));
    }
    Ok(RunReport { output, files })
}
