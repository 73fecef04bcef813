//! Per-sample observables: cost, Lyapunov functional, feasibility and
//! optimality residuals, costates.

use crate::error::Result;
use crate::evolution::{compute_sensitivities, Evaluation, NodeData, SensitivityBundle, SolutionState};
use crate::mesh::{trapezoid, Grid};
use crate::multipliers::{compute_index_sets, max_sym_eigenvalue, min_sym_eigenvalue, GainSet, MultiplierResult};
use crate::problem::{ProblemDef, Vector};
use crate::transition::TransitionSet;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub tau: f64,
    pub j: f64,
    pub v: f64,
    pub tf: f64,
    pub norm_e_x0: f64,
    /// `∫‖e_f‖ dt`
    pub norm_e_f_int: f64,
    pub norm_g_e: f64,
    pub norm_g_i_violated: f64,
    /// `∫‖p̄_u^tc‖ dt`
    pub norm_pu_tc: f64,
    pub abs_ptf_tc: f64,
    pub pi_e: Vec<f64>,
    pub pi_i: Vec<f64>,
    /// Raw inequality values `g_I`.
    pub g_i: Vec<f64>,
    /// Bit `i` set when inequality `i` is active.
    pub active_set: u64,
    /// Max-norm of the packed right-hand side.
    pub rhs_norm: f64,
}

impl DiagnosticsRecord {
    pub fn from_evaluation(tau: f64, problem: &ProblemDef, state: &SolutionState, ev: &Evaluation, cfg: &LyapunovConfig) -> Result<Self> {
        let grid = ev.grid();
        let parts = FeasibilityParts::new(&ev.nodes, &ev.bundle)?;
        let j = cost_from_nodes(&ev.nodes)?;
        let (norm_pu_tc, abs_ptf_tc) = optimality_residuals(problem, &ev.bundle, grid)?;
        Ok(DiagnosticsRecord {
            tau,
            j,
            v: parts.lyapunov(j, cfg),
            tf: state.tf,
            norm_e_x0: parts.e_x0,
            norm_e_f_int: parts.e_f_int,
            norm_g_e: parts.g_e,
            norm_g_i_violated: parts.g_i,
            norm_pu_tc,
            abs_ptf_tc,
            pi_e: ev.multipliers.pi_eq.iter().copied().collect(),
            pi_i: ev.multipliers.pi_ineq.iter().copied().collect(),
            g_i: ev.nodes.ineq.value.iter().copied().collect(),
            active_set: ev.multipliers.sets.active_mask(),
            rhs_norm: ev.derivative.norm(),
        })
    }
}

/// Lyapunov weights and the bound estimates they were derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig {
    pub c1: f64,
    pub c2: f64,
    /// Bounds on `‖p_f‖`, `‖p_x0‖`, `‖π_E‖`, `‖π_I‖`.
    pub d: [f64; 4],
}

fn cost_from_nodes(nodes: &NodeData) -> Result<f64> {
    let running: Vec<f64> = nodes.running.iter().map(|l| l.value).collect();
    Ok(nodes.mayer[nodes.grid.last()].value + trapezoid(&running, &nodes.grid)?)
}

pub fn performance_index(problem: &ProblemDef, state: &SolutionState, grid: &Grid) -> Result<f64> {
    let last = grid.last();
    let mut running = Vec::with_capacity(grid.len());
    for (i, ((x, u), &t)) in state.x.iter().zip(&state.u).zip(&grid.t).enumerate() {
        running.push(problem.eval_running_cost(x, u, t).map_err(|e| e.at_node(i))?.value);
    }
    Ok(problem.eval_mayer(&state.x[last], grid.tf)?.value + trapezoid(&running, grid)?)
}

struct FeasibilityParts {
    e_x0: f64,
    e_f_int: f64,
    g_e: f64,
    g_i: f64,
    e_f_final_sq: f64,
}

impl FeasibilityParts {
    fn new(nodes: &NodeData, bundle: &SensitivityBundle) -> Result<Self> {
        let e_f_norms: Vec<f64> = bundle.e_f.iter().map(|e| e.norm()).collect();
        let violated = compute_index_sets(&nodes.ineq.value).violated;
        let g_i = violated.iter().map(|&i| nodes.ineq.value[i].powi(2)).sum::<f64>().sqrt();
        Ok(FeasibilityParts {
            e_x0: bundle.e_x0.norm(),
            e_f_int: trapezoid(&e_f_norms, &nodes.grid)?,
            g_e: nodes.eq.value.norm(),
            g_i,
            e_f_final_sq: bundle.e_f[nodes.grid.last()].norm_squared(),
        })
    }

    fn lyapunov(&self, j: f64, cfg: &LyapunovConfig) -> f64 {
        self.e_x0 + self.e_f_int + self.g_e + self.g_i + cfg.c1 * j + 0.5 * cfg.c2 * self.e_f_final_sq
    }
}

fn base_bundle(problem: &ProblemDef, state: &SolutionState, grid: &Grid) -> Result<(NodeData, SensitivityBundle)> {
    let nodes = NodeData::evaluate(problem, state, grid)?;
    let ts = crate::transition::propagate_transitions(&nodes.fx, grid)?;
    let bundle = SensitivityBundle::base(problem, state, &nodes, &ts)?;
    Ok((nodes, bundle))
}

pub fn lyapunov_value(problem: &ProblemDef, state: &SolutionState, grid: &Grid, cfg: &LyapunovConfig) -> Result<f64> {
    let (nodes, bundle) = base_bundle(problem, state, grid)?;
    let j = cost_from_nodes(&nodes)?;
    Ok(FeasibilityParts::new(&nodes, &bundle)?.lyapunov(j, cfg))
}

/// Constants from bound estimates `d` on a horizon of length `span`.
pub fn lyapunov_constants(problem: &ProblemDef, gains: &GainSet, d: [f64; 4], span: f64) -> LyapunovConfig {
    let ratio = |gain: &crate::problem::Matrix| min_sym_eigenvalue(gain) / max_sym_eigenvalue(gain);
    let mut ratios = vec![ratio(&gains.k_f) / (d[0] * span), ratio(&gains.k_x0) / (d[1] * span * span)];
    if problem.q_eq > 0 {
        ratios.push(ratio(&gains.k_ge) / d[2]);
    }
    if problem.q_ineq > 0 {
        ratios.push(gains.k_gi.min() / (d[3] * gains.k_gi.max()));
    }
    let c1 = 0.5 * ratios.into_iter().fold(f64::INFINITY, f64::min);
    let k_tf = gains.effective_k_tf(problem);
    let c2 = if k_tf > 0.0 {
        2.0 * k_tf / (2.0 * c1 * min_sym_eigenvalue(&gains.k_f))
    } else {
        1.0
    };
    LyapunovConfig { c1, c2, d }
}

/// Bound estimates at the initial evaluation, then frozen constants.
pub fn calibrate_lyapunov(problem: &ProblemDef, initial: &Evaluation, gains: &GainSet) -> LyapunovConfig {
    let max_norm = |vs: &[Vector]| vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let estimate = |m: f64| (10.0 * m).max(1.0);
    let d = [
        estimate(max_norm(&initial.bundle.p_f)),
        estimate(max_norm(&initial.bundle.p_x0)),
        estimate(initial.multipliers.pi_eq.norm()),
        estimate(initial.multipliers.pi_ineq.norm()),
    ];
    let grid = initial.grid();
    lyapunov_constants(problem, gains, d, grid.tf - grid.t0)
}

/// `(∫‖p̄_u^tc‖ dt, |p̄_tf^tc|)`; the second entry is 0 for a fixed horizon.
pub fn optimality_residuals(problem: &ProblemDef, bundle: &SensitivityBundle, grid: &Grid) -> Result<(f64, f64)> {
    let norms: Vec<f64> = bundle.p_u_bar_tc.iter().map(|p| p.norm()).collect();
    let tf_part = if problem.tf_free() { bundle.p_tf_tc.abs() } else { 0.0 };
    Ok((trapezoid(&norms, grid)?, tf_part))
}

/// `λ(t_i) = p_f(t_i) + Φᵀ(t_f, t_i) ν` from an evaluated bundle.
pub fn costates_from_bundle(bundle: &SensitivityBundle, ts: &TransitionSet) -> Vec<Vector> {
    bundle
        .p_f
        .iter()
        .enumerate()
        .map(|(i, pf)| pf + ts.to_final(i).transpose() * &bundle.nu)
        .collect()
}

pub fn reconstruct_costates(
    problem: &ProblemDef,
    state: &SolutionState,
    grid: &Grid,
    ts: &TransitionSet,
    multipliers: &MultiplierResult,
) -> Result<Vec<Vector>> {
    let nodes = NodeData::evaluate(problem, state, grid)?;
    let bundle = compute_sensitivities(problem, state, &nodes, ts, multipliers)?;
    Ok(costates_from_bundle(&bundle, ts))
}
