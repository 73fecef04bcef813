//! Optimal control problem definitions.
//!
//! A [`ProblemDef`] bundles the dynamics, Bolza cost and terminal constraints of
//! one problem instance as pure callbacks with analytic first derivatives. The
//! solver never differentiates anything itself; [`validate_jacobians`] checks
//! the supplied derivatives against central differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Running cost `L` and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningCost {
    pub value: f64,
    pub dx: Vector,
    pub du: Vector,
}

/// Mayer term `φ(x, t)` with the first and mixed second derivatives the
/// evolution equations need.
#[derive(Debug, Clone, PartialEq)]
pub struct MayerTerm {
    pub value: f64,
    pub dx: Vector,
    pub dt: f64,
    /// `dxx[(i, k)] = ∂²φ/∂x_i∂x_k`
    pub dxx: Matrix,
    pub dtx: Vector,
}

/// Values and Jacobians of a block of terminal constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalConstraint {
    pub value: Vector,
    /// q×n
    pub dx: Matrix,
    pub dt: Vector,
}

impl TerminalConstraint {
    pub fn empty(n: usize) -> Self {
        TerminalConstraint {
            value: Vector::zeros(0),
            dx: Matrix::zeros(0, n),
            dt: Vector::zeros(0),
        }
    }
}

pub type DynamicsFn = Arc<dyn Fn(&Vector, &Vector, f64) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Vector, &Vector, f64) -> (Matrix, Matrix) + Send + Sync>;
pub type RunningCostFn = Arc<dyn Fn(&Vector, &Vector, f64) -> RunningCost + Send + Sync>;
pub type MayerFn = Arc<dyn Fn(&Vector, f64) -> MayerTerm + Send + Sync>;
pub type TerminalFn = Arc<dyn Fn(&Vector, f64) -> TerminalConstraint + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FinalTime {
    Fixed(f64),
    Free,
}

/// One optimal control problem instance.
///
/// Immutable after construction; the callbacks must be pure.
#[derive(Clone)]
pub struct ProblemDef {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub q_eq: usize,
    pub q_ineq: usize,
    pub t0: f64,
    pub x0: Vector,
    pub final_time: FinalTime,
    dynamics: DynamicsFn,
    jacobians: JacobianFn,
    running_cost: RunningCostFn,
    mayer: MayerFn,
    terminal_eq: TerminalFn,
    terminal_ineq: TerminalFn,
}

impl fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("q_eq", &self.q_eq)
            .field("q_ineq", &self.q_ineq)
            .field("t0", &self.t0)
            .field("x0", &self.x0.as_slice())
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl ProblemDef {
    /// Start a problem with the given dynamics. Cost terms default to zero and
    /// there are no terminal constraints until they are added.
    pub fn new<F, J>(
        name: impl Into<String>,
        m: usize,
        t0: f64,
        x0: Vector,
        final_time: FinalTime,
        dynamics: F,
        jacobians: J,
    ) -> Result<Self>
    where
        F: Fn(&Vector, &Vector, f64) -> Vector + Send + Sync + 'static,
        J: Fn(&Vector, &Vector, f64) -> (Matrix, Matrix) + Send + Sync + 'static,
    {
        let n = x0.len();
        if n == 0 || m == 0 {
            return Err(Error::config("state and control dimensions must be at least 1"));
        }
        if let FinalTime::Fixed(tf) = final_time {
            if !(tf > t0) {
                return Err(Error::config(format!("fixed final time {tf} must exceed t0 = {t0}")));
            }
        }
        Ok(ProblemDef {
            name: name.into(),
            n,
            m,
            q_eq: 0,
            q_ineq: 0,
            t0,
            x0,
            final_time,
            dynamics: Arc::new(dynamics),
            jacobians: Arc::new(jacobians),
            running_cost: Arc::new(move |_, _, _| RunningCost {
                value: 0.0,
                dx: Vector::zeros(n),
                du: Vector::zeros(m),
            }),
            mayer: Arc::new(move |_, _| MayerTerm {
                value: 0.0,
                dx: Vector::zeros(n),
                dt: 0.0,
                dxx: Matrix::zeros(n, n),
                dtx: Vector::zeros(n),
            }),
            terminal_eq: Arc::new(move |_, _| TerminalConstraint::empty(n)),
            terminal_ineq: Arc::new(move |_, _| TerminalConstraint::empty(n)),
        })
    }

    pub fn with_running_cost<F>(mut self, cost: F) -> Self
    where
        F: Fn(&Vector, &Vector, f64) -> RunningCost + Send + Sync + 'static,
    {
        self.running_cost = Arc::new(cost);
        self
    }

    pub fn with_mayer<F>(mut self, mayer: F) -> Self
    where
        F: Fn(&Vector, f64) -> MayerTerm + Send + Sync + 'static,
    {
        self.mayer = Arc::new(mayer);
        self
    }

    pub fn with_terminal_eq<F>(mut self, q: usize, constraint: F) -> Self
    where
        F: Fn(&Vector, f64) -> TerminalConstraint + Send + Sync + 'static,
    {
        self.q_eq = q;
        self.terminal_eq = Arc::new(constraint);
        self
    }

    pub fn with_terminal_ineq<F>(mut self, q: usize, constraint: F) -> Self
    where
        F: Fn(&Vector, f64) -> TerminalConstraint + Send + Sync + 'static,
    {
        self.q_ineq = q;
        self.terminal_ineq = Arc::new(constraint);
        self
    }

    pub fn tf_free(&self) -> bool {
        matches!(self.final_time, FinalTime::Free)
    }

    fn check_state(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::shape("state vector", self.n, x.len()));
        }
        Ok(())
    }

    fn check_control(&self, u: &Vector) -> Result<()> {
        if u.len() != self.m {
            return Err(Error::shape("control vector", self.m, u.len()));
        }
        Ok(())
    }

    pub fn eval_dynamics(&self, x: &Vector, u: &Vector, t: f64) -> Result<Vector> {
        self.check_state(x)?;
        self.check_control(u)?;
        let f = (self.dynamics)(x, u, t);
        expect_len("dynamics", &f, self.n)?;
        finite("dynamics", f.iter())?;
        Ok(f)
    }

    /// Returns `(f_x, f_u)`.
    pub fn eval_jacobians(&self, x: &Vector, u: &Vector, t: f64) -> Result<(Matrix, Matrix)> {
        self.check_state(x)?;
        self.check_control(u)?;
        let (fx, fu) = (self.jacobians)(x, u, t);
        expect_dims("dynamics_jacobians f_x", &fx, self.n, self.n)?;
        expect_dims("dynamics_jacobians f_u", &fu, self.n, self.m)?;
        finite("dynamics_jacobians", fx.iter().chain(fu.iter()))?;
        Ok((fx, fu))
    }

    pub fn eval_running_cost(&self, x: &Vector, u: &Vector, t: f64) -> Result<RunningCost> {
        self.check_state(x)?;
        self.check_control(u)?;
        let l = (self.running_cost)(x, u, t);
        expect_len("running_cost L_x", &l.dx, self.n)?;
        expect_len("running_cost L_u", &l.du, self.m)?;
        finite(
            "running_cost",
            std::iter::once(&l.value).chain(l.dx.iter()).chain(l.du.iter()),
        )?;
        Ok(l)
    }

    pub fn eval_mayer(&self, x: &Vector, t: f64) -> Result<MayerTerm> {
        self.check_state(x)?;
        let p = (self.mayer)(x, t);
        expect_len("mayer_term φ_x", &p.dx, self.n)?;
        expect_dims("mayer_term φ_xx", &p.dxx, self.n, self.n)?;
        expect_len("mayer_term φ_tx", &p.dtx, self.n)?;
        finite(
            "mayer_term",
            [p.value, p.dt]
                .iter()
                .chain(p.dx.iter())
                .chain(p.dxx.iter())
                .chain(p.dtx.iter()),
        )?;
        Ok(p)
    }

    pub fn eval_terminal_eq(&self, x: &Vector, t: f64) -> Result<TerminalConstraint> {
        self.check_state(x)?;
        let g = (self.terminal_eq)(x, t);
        self.check_terminal("terminal_eq", &g, self.q_eq)?;
        Ok(g)
    }

    pub fn eval_terminal_ineq(&self, x: &Vector, t: f64) -> Result<TerminalConstraint> {
        self.check_state(x)?;
        let g = (self.terminal_ineq)(x, t);
        self.check_terminal("terminal_ineq", &g, self.q_ineq)?;
        Ok(g)
    }

    fn check_terminal(&self, what: &str, g: &TerminalConstraint, q: usize) -> Result<()> {
        expect_len(what, &g.value, q)?;
        expect_dims(what, &g.dx, q, self.n)?;
        expect_len(what, &g.dt, q)?;
        finite(what, g.value.iter().chain(g.dx.iter()).chain(g.dt.iter()))
    }
}

fn expect_len(what: &str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::shape(what, len, v.len()));
    }
    Ok(())
}

fn expect_dims(what: &str, a: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if a.nrows() != rows {
        return Err(Error::shape(format!("{what} rows"), rows, a.nrows()));
    }
    if a.ncols() != cols {
        return Err(Error::shape(format!("{what} columns"), cols, a.ncols()));
    }
    Ok(())
}

fn finite<'a>(callback: &str, mut values: impl Iterator<Item = &'a f64>) -> Result<()> {
    if values.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Evaluation {
            callback: callback.to_string(),
            node: None,
        })
    }
}

/// Linear double integrator `ẋ = A x + b u`, `A = [0 1; 0 0]`, `b = [0; 1]`,
/// minimising `½∫u²` on the fixed horizon [0, 2] from `x0 = [1, 1]` to the
/// origin.
pub fn builtin_double_integrator() -> ProblemDef {
    let dynamics = |x: &Vector, u: &Vector, _t: f64| Vector::from_vec(vec![x[1], u[0]]);
    let jacobians = |_x: &Vector, _u: &Vector, _t: f64| {
        (
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
    };
    ProblemDef::new(
        "double_integrator",
        1,
        0.0,
        Vector::from_vec(vec![1.0, 1.0]),
        FinalTime::Fixed(2.0),
        dynamics,
        jacobians,
    )
    .expect("double integrator definition is valid")
    .with_running_cost(|_x, u, _t| RunningCost {
        value: 0.5 * u[0] * u[0],
        dx: Vector::zeros(2),
        du: Vector::from_vec(vec![u[0]]),
    })
    .with_terminal_eq(2, |x, _t| TerminalConstraint {
        value: x.clone(),
        dx: Matrix::identity(2, 2),
        dt: Vector::zeros(2),
    })
}

pub const BRACHISTOCHRONE_GRAVITY: f64 = 10.0;

/// Minimum-time descent from rest at the origin to `x(t_f) = 2` with
/// `y(t_f) ≤ y_bound`. State `[x, y, V]`, control is the path angle measured
/// from the downward vertical.
pub fn builtin_brachistochrone(y_bound: f64) -> Result<ProblemDef> {
    if !(y_bound < 0.0) {
        return Err(Error::config(format!(
            "brachistochrone y_bound must be negative, got {y_bound}"
        )));
    }
    let g = BRACHISTOCHRONE_GRAVITY;
    let dynamics = move |x: &Vector, u: &Vector, _t: f64| {
        let (s, c) = u[0].sin_cos();
        Vector::from_vec(vec![x[2] * s, -x[2] * c, g * c])
    };
    let jacobians = move |x: &Vector, u: &Vector, _t: f64| {
        let (s, c) = u[0].sin_cos();
        let v = x[2];
        (
            Matrix::from_row_slice(3, 3, &[0.0, 0.0, s, 0.0, 0.0, -c, 0.0, 0.0, 0.0]),
            Matrix::from_row_slice(3, 1, &[v * c, v * s, -g * s]),
        )
    };
    let problem = ProblemDef::new(
        "brachistochrone",
        1,
        0.0,
        Vector::zeros(3),
        FinalTime::Free,
        dynamics,
        jacobians,
    )?
    // J = t_f in Mayer form.
    .with_mayer(|_x, t| MayerTerm {
        value: t,
        dx: Vector::zeros(3),
        dt: 1.0,
        dxx: Matrix::zeros(3, 3),
        dtx: Vector::zeros(3),
    })
    .with_terminal_eq(1, |x, _t| TerminalConstraint {
        value: Vector::from_vec(vec![x[0] - 2.0]),
        dx: Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
        dt: Vector::zeros(1),
    })
    .with_terminal_ineq(1, move |x, _t| TerminalConstraint {
        value: Vector::from_vec(vec![x[1] - y_bound]),
        dx: Matrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
        dt: Vector::zeros(1),
    });
    Ok(problem)
}

/// Look up a builtin problem by name.
pub fn builtin(name: &str, y_bound: Option<f64>) -> Result<ProblemDef> {
    match name {
        "double_integrator" => {
            if y_bound.is_some() {
                return Err(Error::config("y_bound is not a parameter of double_integrator"));
            }
            Ok(builtin_double_integrator())
        }
        "brachistochrone" => builtin_brachistochrone(y_bound.unwrap_or(-2.0)),
        other => Err(Error::config(format!("unknown problem \"{other}\""))),
    }
}

/// Default threshold for [`validate_jacobians`].
pub const JACOBIAN_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CallbackCheck {
    pub callback: &'static str,
    pub max_discrepancy: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub threshold: f64,
    pub checks: Vec<CallbackCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.checks.iter().map(|c| c.max_discrepancy).fold(0.0, f64::max)
    }

    pub fn check(&self, callback: &str) -> Option<&CallbackCheck> {
        self.checks.iter().find(|c| c.callback == callback)
    }
}

/// One sample point `(x, u, t)`; the terminal callbacks are checked at `(x, t)`.
pub type Sample = (Vector, Vector, f64);

fn fd_step(value: f64) -> f64 {
    1e-6 * (1.0 + value.abs())
}

fn discrepancy(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (1.0 + numeric.abs().max(analytic.abs()))
}

/// Compare every analytic derivative against central finite differences.
pub fn validate_jacobians(problem: &ProblemDef, samples: &[Sample]) -> Result<ValidationReport> {
    validate_jacobians_with(problem, samples, JACOBIAN_TOLERANCE)
}

pub fn validate_jacobians_with(
    problem: &ProblemDef,
    samples: &[Sample],
    threshold: f64,
) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(Error::config("validate_jacobians needs at least one sample"));
    }
    let names = [
        "dynamics_jacobians",
        "running_cost",
        "mayer_term",
        "terminal_eq",
        "terminal_ineq",
    ];
    let mut worst = [0.0_f64; 5];
    for (k, (x, u, t)) in samples.iter().enumerate() {
        let errs = sample_discrepancies(problem, x, u, *t).map_err(|e| e.at_node(k))?;
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let checks = names
        .iter()
        .zip(worst)
        .map(|(&callback, max_discrepancy)| CallbackCheck {
            callback,
            max_discrepancy,
            passed: max_discrepancy <= threshold,
        })
        .collect();
    Ok(ValidationReport { threshold, checks })
}

fn perturbed(v: &Vector, k: usize, delta: f64) -> Vector {
    let mut p = v.clone();
    p[k] += delta;
    p
}

/// Central difference of a vector-valued map along one coordinate of `v`.
fn central<F>(v: &Vector, k: usize, eval: F) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let h = fd_step(v[k]);
    let plus = eval(&perturbed(v, k, h))?;
    let minus = eval(&perturbed(v, k, -h))?;
    Ok((plus - minus) / (2.0 * h))
}

fn max_column_gap(analytic: &Matrix, col: usize, numeric: &Vector) -> f64 {
    numeric
        .iter()
        .enumerate()
        .map(|(i, &fd)| discrepancy(analytic[(i, col)], fd))
        .fold(0.0, f64::max)
}

fn sample_discrepancies(p: &ProblemDef, x: &Vector, u: &Vector, t: f64) -> Result<[f64; 5]> {
    let mut out = [0.0_f64; 5];

    let (fx, fu) = p.eval_jacobians(x, u, t)?;
    for k in 0..p.n {
        let fd = central(x, k, |xp| p.eval_dynamics(xp, u, t))?;
        out[0] = out[0].max(max_column_gap(&fx, k, &fd));
    }
    for k in 0..p.m {
        let fd = central(u, k, |up| p.eval_dynamics(x, up, t))?;
        out[0] = out[0].max(max_column_gap(&fu, k, &fd));
    }

    let l = p.eval_running_cost(x, u, t)?;
    let cost = |xp: &Vector, up: &Vector| -> Result<Vector> {
        Ok(Vector::from_element(1, p.eval_running_cost(xp, up, t)?.value))
    };
    for k in 0..p.n {
        let fd = central(x, k, |xp| cost(xp, u))?;
        out[1] = out[1].max(discrepancy(l.dx[k], fd[0]));
    }
    for k in 0..p.m {
        let fd = central(u, k, |up| cost(x, up))?;
        out[1] = out[1].max(discrepancy(l.du[k], fd[0]));
    }

    let phi = p.eval_mayer(x, t)?;
    let ht = fd_step(t);
    for k in 0..p.n {
        let fd = central(x, k, |xp| Ok(Vector::from_element(1, p.eval_mayer(xp, t)?.value)))?;
        out[2] = out[2].max(discrepancy(phi.dx[k], fd[0]));
        let fd = central(x, k, |xp| Ok(p.eval_mayer(xp, t)?.dx))?;
        out[2] = out[2].max(max_column_gap(&phi.dxx, k, &fd));
    }
    let plus = p.eval_mayer(x, t + ht)?;
    let minus = p.eval_mayer(x, t - ht)?;
    out[2] = out[2].max(discrepancy(phi.dt, (plus.value - minus.value) / (2.0 * ht)));
    let dtx_fd = (&plus.dx - &minus.dx) / (2.0 * ht);
    for (a, fd) in phi.dtx.iter().zip(dtx_fd.iter()) {
        out[2] = out[2].max(discrepancy(*a, *fd));
    }

    for (slot, eval) in [
        (3, &p.terminal_eq as &TerminalFn),
        (4, &p.terminal_ineq as &TerminalFn),
    ] {
        let g = if slot == 3 {
            p.eval_terminal_eq(x, t)?
        } else {
            p.eval_terminal_ineq(x, t)?
        };
        for k in 0..p.n {
            let fd = central(x, k, |xp| Ok(eval(xp, t).value))?;
            out[slot] = out[slot].max(max_column_gap(&g.dx, k, &fd));
        }
        let fd = (eval(x, t + ht).value - eval(x, t - ht).value) / (2.0 * ht);
        for (a, n) in g.dt.iter().zip(fd.iter()) {
            out[slot] = out[slot].max(discrepancy(*a, *n));
        }
    }
    Ok(out)
}
