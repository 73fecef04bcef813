//! Variation-time right-hand side.
//!
//! The unknowns are node values of `x` and `u` on a uniform grid over
//! `[t0, t_f]` plus `t_f` itself when it is free. One evaluation rebuilds the
//! grid, evaluates every callback once per node, propagates the transition
//! matrices, solves for the constraint multipliers and then forms the rates.

use crate::error::{Error, Result};
use crate::mesh::{make_grid, reverse_running_trapezoid, running_trapezoid, time_derivative, Grid};
use crate::multipliers::{compute_index_sets, solve_active_set, ConstraintSystem, GainSet, MultiplierResult};
use crate::problem::{FinalTime, Matrix, MayerTerm, ProblemDef, RunningCost, TerminalConstraint, Vector};
use crate::transition::{propagate_transitions, TransitionSet};

/// Node values of the evolving trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    /// Current terminal time; for a fixed horizon this is the fixed value and
    /// is not part of the packed vector.
    pub tf: f64,
}

/// Packed length: `N (n + m)`, plus one when `t_f` is free.
pub fn packed_len(problem: &ProblemDef, nodes: usize) -> usize {
    nodes * (problem.n + problem.m) + usize::from(problem.tf_free())
}

fn pack_blocks(x: &[Vector], u: &[Vector], tf: Option<f64>) -> Vector {
    let mut out: Vec<f64> = Vec::new();
    for xi in x {
        out.extend(xi.iter());
    }
    for ui in u {
        out.extend(ui.iter());
    }
    out.extend(tf);
    Vector::from_vec(out)
}

impl SolutionState {
    /// Constant state and affine control `u(t) = a + b (t - t0)`.
    pub fn constant_guess(problem: &ProblemDef, nodes: usize, x: &Vector, u_offset: &Vector, u_slope: &Vector, tf: f64) -> Result<Self> {
        if x.len() != problem.n {
            return Err(Error::shape("state guess", problem.n, x.len()));
        }
        if u_offset.len() != problem.m || u_slope.len() != problem.m {
            return Err(Error::shape("control guess", problem.m, u_offset.len().min(u_slope.len())));
        }
        let tf = match problem.final_time {
            FinalTime::Fixed(t) => t,
            FinalTime::Free => tf,
        };
        let grid = make_grid(nodes, problem.t0, tf)?;
        Ok(SolutionState {
            x: vec![x.clone(); nodes],
            u: grid.t.iter().map(|&t| u_offset + u_slope * (t - problem.t0)).collect(),
            tf,
        })
    }

    pub fn nodes(&self) -> usize {
        self.x.len()
    }

    pub fn pack(&self, problem: &ProblemDef) -> Vector {
        pack_blocks(&self.x, &self.u, problem.tf_free().then_some(self.tf))
    }

    pub fn unpack(problem: &ProblemDef, nodes: usize, y: &Vector) -> Result<Self> {
        let expected = packed_len(problem, nodes);
        if y.len() != expected {
            return Err(Error::shape("packed state", expected, y.len()));
        }
        let (n, m) = (problem.n, problem.m);
        let x = (0..nodes).map(|i| y.rows(i * n, n).into_owned()).collect();
        let off = nodes * n;
        let u = (0..nodes).map(|i| y.rows(off + i * m, m).into_owned()).collect();
        let tf = match problem.final_time {
            FinalTime::Fixed(t) => t,
            FinalTime::Free => y[expected - 1],
        };
        Ok(SolutionState { x, u, tf })
    }

    pub fn check(&self, problem: &ProblemDef) -> Result<()> {
        if self.x.len() != self.u.len() {
            return Err(Error::shape("control node count", self.x.len(), self.u.len()));
        }
        if let Some(bad) = self.x.iter().find(|v| v.len() != problem.n) {
            return Err(Error::shape("node state", problem.n, bad.len()));
        }
        if let Some(bad) = self.u.iter().find(|v| v.len() != problem.m) {
            return Err(Error::shape("node control", problem.m, bad.len()));
        }
        if self.x.len() < 3 {
            return Err(Error::config(format!("grid needs at least 3 nodes, got {}", self.x.len())));
        }
        Ok(())
    }

    pub fn grid(&self, problem: &ProblemDef) -> Result<Grid> {
        make_grid(self.nodes(), problem.t0, self.tf)
    }
}

/// Rates in the same layout as [`SolutionState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dx: Vec<Vector>,
    pub du: Vec<Vector>,
    /// Exactly 0 for a fixed horizon.
    pub dtf: f64,
}

impl StateDerivative {
    pub fn pack(&self, problem: &ProblemDef) -> Vector {
        pack_blocks(&self.dx, &self.du, problem.tf_free().then_some(self.dtf))
    }

    /// Max-norm of the packed vector.
    pub fn norm(&self) -> f64 {
        self.dx
            .iter()
            .chain(&self.du)
            .map(|v| v.amax())
            .fold(self.dtf.abs(), f64::max)
    }
}

/// Every callback output along the current trajectory.
#[derive(Debug, Clone)]
pub struct NodeData {
    pub grid: Grid,
    pub f: Vec<Vector>,
    pub fx: Vec<Matrix>,
    pub fu: Vec<Matrix>,
    pub running: Vec<RunningCost>,
    /// Mayer term and its derivatives at every `(x_i, t_i)`.
    pub mayer: Vec<MayerTerm>,
    /// Terminal constraints at `(x_{N-1}, t_f)`.
    pub eq: TerminalConstraint,
    pub ineq: TerminalConstraint,
}

impl NodeData {
    pub fn evaluate(problem: &ProblemDef, state: &SolutionState, grid: &Grid) -> Result<Self> {
        state.check(problem)?;
        if grid.len() != state.nodes() {
            return Err(Error::shape("grid nodes", state.nodes(), grid.len()));
        }
        let n_nodes = grid.len();
        let mut f = Vec::with_capacity(n_nodes);
        let mut fx = Vec::with_capacity(n_nodes);
        let mut fu = Vec::with_capacity(n_nodes);
        let mut running = Vec::with_capacity(n_nodes);
        let mut mayer = Vec::with_capacity(n_nodes);
        for (i, ((x, u), &t)) in state.x.iter().zip(&state.u).zip(&grid.t).enumerate() {
            let at = |e: Error| e.at_node(i);
            f.push(problem.eval_dynamics(x, u, t).map_err(at)?);
            let (a, b) = problem.eval_jacobians(x, u, t).map_err(at)?;
            fx.push(a);
            fu.push(b);
            running.push(problem.eval_running_cost(x, u, t).map_err(at)?);
            mayer.push(problem.eval_mayer(x, t).map_err(at)?);
        }
        let xf = &state.x[n_nodes - 1];
        let eq = problem.eval_terminal_eq(xf, grid.tf)?;
        let ineq = problem.eval_terminal_ineq(xf, grid.tf)?;
        Ok(NodeData {
            grid: grid.clone(),
            f,
            fx,
            fu,
            running,
            mayer,
            eq,
            ineq,
        })
    }
}

/// Errors, sensitivity kernels and the multiplier-corrected gradients.
#[derive(Debug, Clone)]
pub struct SensitivityBundle {
    pub xdot: Vec<Vector>,
    pub e_f: Vec<Vector>,
    pub e_x0: Vector,
    /// Backward kernel, zero at `t_f`.
    pub w: Vec<Vector>,
    pub p_u_bar: Vec<Vector>,
    pub p_f: Vec<Vector>,
    pub p_x0: Vec<Vector>,
    /// `Φ(t_f, t_j) f_u(t_j)`.
    pub influence: Vec<Matrix>,
    pub p_u_bar_tc: Vec<Vector>,
    pub p_tf_tc: f64,
    /// `G_Eᵀ π_E + G_Iᵀ π_I`.
    pub nu: Vector,
}

/// Integrand of the backward kernel at every node.
pub(crate) fn kernel_source(nodes: &NodeData, xdot: &[Vector]) -> Vec<Vector> {
    (0..nodes.grid.len())
        .map(|j| {
            let phi = &nodes.mayer[j];
            &nodes.running[j].dx + &phi.dtx + phi.dxx.transpose() * &xdot[j] + nodes.fx[j].transpose() * &phi.dx
        })
        .collect()
}

impl SensitivityBundle {
    /// Everything that does not depend on the multipliers; the corrected
    /// fields start out equal to their uncorrected counterparts.
    pub fn base(problem: &ProblemDef, state: &SolutionState, nodes: &NodeData, ts: &TransitionSet) -> Result<Self> {
        let grid = &nodes.grid;
        let xdot = time_derivative(&state.x, grid)?;
        let e_f: Vec<Vector> = xdot.iter().zip(&nodes.f).map(|(d, f)| d - f).collect();
        let e_x0 = &state.x[0] - &problem.x0;

        let q = kernel_source(nodes, &xdot);
        let pulled: Vec<Vector> = q.iter().zip(&ts.phi0).map(|(q, p)| p.transpose() * q).collect();
        let tail = reverse_running_trapezoid(&pulled, grid)?;
        let mut w: Vec<Vector> = tail.iter().zip(&ts.phi0_inv).map(|(r, inv)| inv.transpose() * r).collect();
        let last = grid.last();
        w[last].fill(0.0);

        let p_u_bar: Vec<Vector> = (0..grid.len())
            .map(|i| &nodes.running[i].du + nodes.fu[i].transpose() * (&nodes.mayer[i].dx + &w[i]))
            .collect();
        let p_f = (0..grid.len()).map(|i| &nodes.mayer[i].dx + &w[i]).collect();
        let p_x0 = pulled;
        let influence = (0..grid.len()).map(|j| ts.to_final(j) * &nodes.fu[j]).collect();

        let mayer_f = &nodes.mayer[last];
        let p_tf_tc = nodes.running[last].value + mayer_f.dt + mayer_f.dx.dot(&xdot[last]);
        Ok(SensitivityBundle {
            xdot,
            e_f,
            e_x0,
            w,
            p_u_bar_tc: p_u_bar.clone(),
            p_u_bar,
            p_f,
            p_x0,
            influence,
            p_tf_tc,
            nu: Vector::zeros(problem.n),
        })
    }

    /// Add the terminal-constraint corrections for the given multipliers.
    pub fn apply_multipliers(&mut self, nodes: &NodeData, multipliers: &MultiplierResult) {
        let nu = nodes.eq.dx.transpose() * &multipliers.pi_eq + nodes.ineq.dx.transpose() * &multipliers.pi_ineq;
        self.p_u_bar_tc = self
            .p_u_bar
            .iter()
            .zip(&self.influence)
            .map(|(p, b)| p + b.transpose() * &nu)
            .collect();
        let xdot_f = &self.xdot[nodes.grid.last()];
        let mayer_f = &nodes.mayer[nodes.grid.last()];
        let base = nodes.running[nodes.grid.last()].value + mayer_f.dt + mayer_f.dx.dot(xdot_f);
        let eq_rate = &nodes.eq.dx * xdot_f + &nodes.eq.dt;
        let ineq_rate = &nodes.ineq.dx * xdot_f + &nodes.ineq.dt;
        self.p_tf_tc = base + multipliers.pi_eq.dot(&eq_rate) + multipliers.pi_ineq.dot(&ineq_rate);
        self.nu = nu;
    }
}

/// Full bundle for a given multiplier solution.
pub fn compute_sensitivities(
    problem: &ProblemDef,
    state: &SolutionState,
    nodes: &NodeData,
    ts: &TransitionSet,
    multipliers: &MultiplierResult,
) -> Result<SensitivityBundle> {
    let mut bundle = SensitivityBundle::base(problem, state, nodes, ts)?;
    bundle.apply_multipliers(nodes, multipliers);
    Ok(bundle)
}

pub fn control_rate(bundle: &SensitivityBundle, gains: &GainSet) -> Vec<Vector> {
    bundle.p_u_bar_tc.iter().map(|p| -(&gains.k * p)).collect()
}

pub fn terminal_time_rate(problem: &ProblemDef, bundle: &SensitivityBundle, gains: &GainSet) -> f64 {
    if !problem.tf_free() {
        return 0.0;
    }
    -gains.k_tf * bundle.p_tf_tc
}

pub fn state_rate(
    nodes: &NodeData,
    ts: &TransitionSet,
    gains: &GainSet,
    bundle: &SensitivityBundle,
    u_rates: &[Vector],
) -> Result<Vec<Vector>> {
    let grid = &nodes.grid;
    if u_rates.len() != grid.len() {
        return Err(Error::shape("control rate nodes", grid.len(), u_rates.len()));
    }
    let pulled: Vec<Vector> = (0..grid.len())
        .map(|j| &ts.phi0_inv[j] * (&nodes.fu[j] * &u_rates[j] - &gains.k_f * &bundle.e_f[j]))
        .collect();
    let running = running_trapezoid(&pulled, grid)?;
    let initial = &gains.k_x0 * &bundle.e_x0;
    Ok(running
        .iter()
        .zip(&ts.phi0)
        .map(|(c, phi)| phi * (c - &initial))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvolutionOptions {
    /// Hold node values at fixed normalized coordinates while `t_f` moves.
    pub mesh_convection: bool,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions { mesh_convection: true }
    }
}

/// Every intermediate of one right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub nodes: NodeData,
    pub transitions: TransitionSet,
    pub multipliers: MultiplierResult,
    pub bundle: SensitivityBundle,
    pub derivative: StateDerivative,
}

impl Evaluation {
    pub fn grid(&self) -> &Grid {
        &self.nodes.grid
    }
}

pub fn evaluate(problem: &ProblemDef, state: &SolutionState, gains: &GainSet, options: EvolutionOptions) -> Result<Evaluation> {
    let grid = state.grid(problem).map_err(|e| e.in_stage("grid"))?;
    let nodes = NodeData::evaluate(problem, state, &grid).map_err(|e| e.in_stage("callbacks"))?;
    let ts = propagate_transitions(&nodes.fx, &grid).map_err(|e| e.in_stage("transitions"))?;
    let mut bundle = SensitivityBundle::base(problem, state, &nodes, &ts).map_err(|e| e.in_stage("sensitivities"))?;
    let sets = compute_index_sets(&nodes.ineq.value);
    let multipliers = ConstraintSystem::build(problem, &nodes, &ts, gains, &bundle, &sets.violated)
        .and_then(|sys| solve_active_set(&sys))
        .map_err(|e| e.in_stage("multipliers"))?;
    bundle.apply_multipliers(&nodes, &multipliers);

    let mut du = control_rate(&bundle, gains);
    let dtf = terminal_time_rate(problem, &bundle, gains);
    let mut dx = state_rate(&nodes, &ts, gains, &bundle, &du).map_err(|e| e.in_stage("state rate"))?;
    if problem.tf_free() && options.mesh_convection && dtf != 0.0 {
        let udot = time_derivative(&state.u, &grid).map_err(|e| e.in_stage("state rate"))?;
        for (i, &s) in grid.s.iter().enumerate() {
            dx[i].axpy(s * dtf, &bundle.xdot[i], 1.0);
            du[i].axpy(s * dtf, &udot[i], 1.0);
        }
    }
    Ok(Evaluation {
        nodes,
        transitions: ts,
        multipliers,
        bundle,
        derivative: StateDerivative { dx, du, dtf },
    })
}

pub fn evolution_rhs(problem: &ProblemDef, state: &SolutionState, gains: &GainSet, options: EvolutionOptions) -> Result<StateDerivative> {
    evaluate(problem, state, gains, options).map(|e| e.derivative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin_brachistochrone, builtin_double_integrator};
    use approx::assert_abs_diff_eq;

    fn example1_gains(p: &ProblemDef) -> GainSet {
        GainSet::uniform(p, 0.1, 0.1, 0.1, 0.1, 0.1, 0.0)
    }

    fn example1_optimum(nodes: usize) -> SolutionState {
        let grid = make_grid(nodes, 0.0, 2.0).unwrap();
        SolutionState {
            x: grid
                .t
                .iter()
                .map(|&t| Vector::from_vec(vec![0.5 * t.powi(3) - 1.75 * t * t + t + 1.0, 1.5 * t * t - 3.5 * t + 1.0]))
                .collect(),
            u: grid.t.iter().map(|&t| Vector::from_element(1, 3.0 * t - 3.5)).collect(),
            tf: 2.0,
        }
    }

    #[test]
    fn pack_round_trip_and_length() {
        let p = builtin_brachistochrone(-2.0).unwrap();
        assert_eq!(packed_len(&p, 101), 405);
        let s = SolutionState::constant_guess(
            &p,
            101,
            &Vector::from_element(3, 1.0),
            &Vector::zeros(1),
            &Vector::from_element(1, 1.0),
            1.0,
        )
        .unwrap();
        let y = s.pack(&p);
        assert_eq!(y.len(), 405);
        assert_eq!(SolutionState::unpack(&p, 101, &y).unwrap(), s);
        assert!(SolutionState::unpack(&p, 100, &y).is_err());

        let p = builtin_double_integrator();
        assert_eq!(packed_len(&p, 41), 123);
    }

    #[test]
    fn initial_state_rate_at_first_node() {
        let p = builtin_double_integrator();
        let s = SolutionState::constant_guess(&p, 41, &Vector::from_element(2, 0.5), &Vector::zeros(1), &Vector::zeros(1), 2.0).unwrap();
        let d = evolution_rhs(&p, &s, &example1_gains(&p), EvolutionOptions::default()).unwrap();
        assert_abs_diff_eq!(d.dx[0][0], 0.05, epsilon = 1e-14);
        assert_abs_diff_eq!(d.dx[0][1], 0.05, epsilon = 1e-14);
        assert_eq!(d.dtf, 0.0);
    }

    #[test]
    fn optimum_is_near_equilibrium() {
        let p = builtin_double_integrator();
        let gains = example1_gains(&p);
        let residual = |nodes: usize| {
            let ev = evaluate(&p, &example1_optimum(nodes), &gains, EvolutionOptions::default()).unwrap();
            for (pu, t) in ev.bundle.p_u_bar.iter().zip(&ev.grid().t) {
                assert_abs_diff_eq!(pu[0], 3.0 * t - 3.5, epsilon = 1e-3);
            }
            assert!(ev.bundle.w.iter().all(|w| w.amax() == 0.0));
            let putc = ev.bundle.p_u_bar_tc.iter().map(|p| p.amax()).fold(0.0, f64::max);
            let du = ev.derivative.du.iter().map(|d| d.amax()).fold(0.0, f64::max);
            assert!(ev.derivative.norm() <= 5e-3, "{}", ev.derivative.norm());
            (putc, du)
        };
        // The trapezoid Gram matrix shifts the multipliers by O(h²), so the
        // continuous optimum sits off the discrete equilibrium by that much.
        let (coarse, du_coarse) = residual(41);
        let (fine, du_fine) = residual(81);
        assert!(fine <= 2e-3, "{fine}");
        assert!(du_fine <= 2e-4, "{du_fine}");
        assert_abs_diff_eq!(coarse / fine, 4.0, epsilon = 0.2);
        assert_abs_diff_eq!(du_coarse / du_fine, 4.0, epsilon = 0.2);
    }

    #[test]
    fn scalar_toy_kernel() {
        // ẋ = u, L = x: Φ ≡ 1 and q ≡ 1, so p_f(t) = t_f − t.
        let p = ProblemDef::new(
            "toy",
            1,
            0.0,
            Vector::zeros(1),
            FinalTime::Fixed(1.5),
            |_, u, _| u.clone(),
            |_, _, _| (Matrix::zeros(1, 1), Matrix::identity(1, 1)),
        )
        .unwrap()
        .with_running_cost(|x, _, _| RunningCost {
            value: x[0],
            dx: Vector::from_element(1, 1.0),
            du: Vector::zeros(1),
        });
        let s = SolutionState::constant_guess(&p, 31, &Vector::zeros(1), &Vector::zeros(1), &Vector::zeros(1), 1.5).unwrap();
        let ev = evaluate(&p, &s, &GainSet::uniform(&p, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0), EvolutionOptions::default()).unwrap();
        for (pf, t) in ev.bundle.p_f.iter().zip(&ev.grid().t) {
            assert_abs_diff_eq!(pf[0], 1.5 - t, epsilon = 1e-13);
        }
        assert_eq!(ev.bundle.w[30][0], 0.0);
    }

    #[test]
    fn rates_are_linear_in_gains() {
        let p = builtin_brachistochrone(-2.0).unwrap();
        let s = SolutionState::constant_guess(&p, 21, &Vector::from_element(3, 1.0), &Vector::zeros(1), &Vector::from_element(1, 1.0), 1.0).unwrap();
        let gains = GainSet::uniform(&p, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05);
        let ev = evaluate(&p, &s, &gains, EvolutionOptions::default()).unwrap();
        let mut doubled = gains.clone();
        doubled.k *= 2.0;
        doubled.k_tf *= 2.0;
        let a = control_rate(&ev.bundle, &gains);
        let b = control_rate(&ev.bundle, &doubled);
        for (a, b) in a.iter().zip(&b) {
            assert_eq!(a * 2.0, *b);
        }
        assert_eq!(
            terminal_time_rate(&p, &ev.bundle, &gains) * 2.0,
            terminal_time_rate(&p, &ev.bundle, &doubled)
        );
    }

    #[test]
    fn fixed_horizon_has_zero_terminal_rate() {
        let p = builtin_double_integrator();
        let s = SolutionState::constant_guess(&p, 11, &Vector::from_element(2, 0.5), &Vector::zeros(1), &Vector::zeros(1), 2.0).unwrap();
        let mut gains = example1_gains(&p);
        gains.k_tf = 1.0;
        let ev = evaluate(&p, &s, &gains, EvolutionOptions::default()).unwrap();
        assert_eq!(terminal_time_rate(&p, &ev.bundle, &gains), 0.0);
    }

    #[test]
    fn mayer_only_rate_at_feasible_point() {
        // With both constraints satisfied strictly inside and zero
        // multipliers, the terminal rate reduces to −k_tf φ_t.
        let p = builtin_brachistochrone(-2.0).unwrap();
        let nodes = 11;
        let tf = 1.0;
        let grid = make_grid(nodes, 0.0, tf).unwrap();
        let s = SolutionState {
            x: grid.t.iter().map(|&t| Vector::from_vec(vec![2.0 * t, -3.0 * t, 0.0])).collect(),
            u: vec![Vector::zeros(1); nodes],
            tf,
        };
        let nd = NodeData::evaluate(&p, &s, &grid).unwrap();
        let ts = propagate_transitions(&nd.fx, &grid).unwrap();
        let mult = MultiplierResult::empty(p.q_eq, p.q_ineq);
        let mut bundle = compute_sensitivities(&p, &s, &nd, &ts, &mult).unwrap();
        let gains = GainSet::uniform(&p, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05);
        assert_abs_diff_eq!(terminal_time_rate(&p, &bundle, &gains), -0.05, epsilon = 1e-15);
        bundle.p_tf_tc = 0.0;
        assert_eq!(terminal_time_rate(&p, &bundle, &gains), 0.0);
    }

    #[test]
    fn evaluation_errors_carry_stage() {
        let p = builtin_double_integrator();
        let mut s = example1_optimum(11);
        s.x[4][1] = f64::NAN;
        let err = evolution_rhs(&p, &s, &example1_gains(&p), EvolutionOptions::default()).unwrap_err();
        assert!(err.to_string().starts_with("callbacks:"), "{err}");
        assert!(matches!(err.root(), Error::Evaluation { node: Some(4), .. }));
    }
}
