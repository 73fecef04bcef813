//! Browser bindings: solve a configuration, check builtin Jacobians and
//! measure the equilibrium residual of the double-integrator optimum.

use vemopt::cli::parse_config_str;
use vemopt::mesh::make_grid;
use vemopt::problem::{validate_jacobians, Sample};
use vemopt::{builtin, evolution_rhs, EvolutionOptions, GainSet, SolutionState, SolveSettings, Vector};
use wasm_bindgen::prelude::*;

fn js_err(e: vemopt::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Histories and the final trajectory of one run.
#[wasm_bindgen]
pub struct RunResult {
    n: usize,
    m: usize,
    tau: Vec<f64>,
    j: Vec<f64>,
    v: Vec<f64>,
    tf: Vec<f64>,
    rhs_norm: Vec<f64>,
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    pi_e: Vec<f64>,
    pi_i: Vec<f64>,
    accepted: usize,
    rejected: usize,
    error: Option<String>,
}

#[wasm_bindgen]
impl RunResult {
    #[wasm_bindgen(getter)]
    pub fn state_dim(&self) -> usize {
        self.n
    }

    #[wasm_bindgen(getter)]
    pub fn control_dim(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> Vec<f64> {
        self.tau.clone()
    }

    pub fn cost(&self) -> Vec<f64> {
        self.j.clone()
    }

    pub fn lyapunov(&self) -> Vec<f64> {
        self.v.clone()
    }

    pub fn final_time(&self) -> Vec<f64> {
        self.tf.clone()
    }

    pub fn rhs_norm(&self) -> Vec<f64> {
        self.rhs_norm.clone()
    }

    /// Node times of the final trajectory.
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    pub fn state(&self, k: usize) -> Vec<f64> {
        self.x.get(k).cloned().unwrap_or_default()
    }

    pub fn control(&self, k: usize) -> Vec<f64> {
        self.u.get(k).cloned().unwrap_or_default()
    }

    pub fn pi_eq(&self) -> Vec<f64> {
        self.pi_e.clone()
    }

    pub fn pi_ineq(&self) -> Vec<f64> {
        self.pi_i.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    #[wasm_bindgen(getter)]
    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Set when the integration stopped before `tau_max`.
    #[wasm_bindgen(getter)]
    pub fn error(&self) -> Option<String> {
        self.error.clone()
    }
}

/// Run a configuration given as TOML text. Output keys are ignored; nothing
/// is written.
#[wasm_bindgen]
pub fn solve_config(text: &str) -> Result<RunResult, JsError> {
    let spec = parse_config_str(text, std::path::Path::new(".")).map_err(js_err)?;
    spec.validate().map_err(js_err)?;
    let settings = SolveSettings {
        gains: spec.gains.clone(),
        options: EvolutionOptions {
            mesh_convection: spec.mesh_convection,
        },
        integrator: spec.integrator,
        snapshot_taus: Vec::new(),
    };
    let initial = spec.initial_state().map_err(js_err)?;
    let out = vemopt::solve(&spec.problem, &initial, &settings).map_err(js_err)?;
    let grid = out.state.grid(&spec.problem).map_err(js_err)?;
    let column = |rows: &[Vector], k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let h = &out.history;
    let last = h.last();
    Ok(RunResult {
        n: spec.problem.n,
        m: spec.problem.m,
        tau: h.iter().map(|r| r.tau).collect(),
        j: h.iter().map(|r| r.j).collect(),
        v: h.iter().map(|r| r.v).collect(),
        tf: h.iter().map(|r| r.tf).collect(),
        rhs_norm: h.iter().map(|r| r.rhs_norm).collect(),
        t: grid.t.clone(),
        x: (0..spec.problem.n).map(|k| column(&out.state.x, k)).collect(),
        u: (0..spec.problem.m).map(|k| column(&out.state.u, k)).collect(),
        pi_e: last.map(|r| r.pi_e.clone()).unwrap_or_default(),
        pi_i: last.map(|r| r.pi_i.clone()).unwrap_or_default(),
        accepted: out.accepted_steps,
        rejected: out.rejected_steps,
        error: out.error.map(|e| e.to_string()),
    })
}

/// Largest Jacobian discrepancy of a builtin over `count` quasi-random points
/// in `[-3, 3]` for every state and control component and `t ∈ [0, 2]`.
/// `y_bound` applies to the brachistochrone only.
#[wasm_bindgen]
pub fn check_jacobians(problem: &str, y_bound: Option<f64>, count: usize) -> Result<f64, JsError> {
    let p = builtin(problem, y_bound).map_err(js_err)?;
    let dims = p.n + p.m + 1;
    // Additive recurrence with irrational steps (Weyl sequence).
    let steps: Vec<f64> = (0..dims).map(|d| ((d + 2) as f64).sqrt().fract()).collect();
    let point = |i: usize, d: usize| ((i + 1) as f64 * steps[d]).fract();
    let samples: Vec<Sample> = (0..count.max(1))
        .map(|i| {
            let x = Vector::from_fn(p.n, |k, _| 6.0 * point(i, k) - 3.0);
            let u = Vector::from_fn(p.m, |k, _| 6.0 * point(i, p.n + k) - 3.0);
            (x, u, 2.0 * point(i, dims - 1))
        })
        .collect();
    let report = validate_jacobians(&p, &samples).map_err(js_err)?;
    Ok(report.max_discrepancy())
}

/// Packed right-hand-side norm at the exact double-integrator optimum on a
/// grid of `nodes` points.
#[wasm_bindgen]
pub fn equilibrium_residual(nodes: usize) -> Result<f64, JsError> {
    let p = builtin("double_integrator", None).map_err(js_err)?;
    let gains = GainSet::uniform(&p, 0.1, 0.1, 0.1, 0.1, 0.1, 0.0);
    let grid = make_grid(nodes, 0.0, 2.0).map_err(js_err)?;
    let state = SolutionState {
        x: grid
            .t
            .iter()
            .map(|&t| Vector::from_vec(vec![0.5 * t.powi(3) - 1.75 * t * t + t + 1.0, 1.5 * t * t - 3.5 * t + 1.0]))
            .collect(),
        u: grid.t.iter().map(|&t| Vector::from_element(1, 3.0 * t - 3.5)).collect(),
        tf: 2.0,
    };
    let rhs = evolution_rhs(&p, &state, &gains, EvolutionOptions::default()).map_err(js_err)?;
    Ok(rhs.norm())
}
