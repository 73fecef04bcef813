//! State transition matrices along the current trajectory.

use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::problem::Matrix;

/// Transitions are considered unusable beyond this condition estimate.
pub const MAX_TRANSITION_CONDITION: f64 = 1e12;

/// `Φ(t_i, t0)` at every node together with its inverse.
#[derive(Debug, Clone)]
pub struct TransitionSet {
    pub phi0: Vec<Matrix>,
    pub phi0_inv: Vec<Matrix>,
    /// Largest 1-norm condition number among the `phi0[i]`.
    pub cond_max: f64,
}

/// Propagate `dΦ/dt = f_x(t) Φ`, `Φ(t0, t0) = I`, one classical RK4 step per
/// grid interval with `f_x` interpolated linearly at the interval midpoint.
///
/// `fx[i]` is the state Jacobian at node `i` of the current (possibly
/// infeasible) trajectory.
pub fn propagate_transitions(fx: &[Matrix], grid: &Grid) -> Result<TransitionSet> {
    if fx.len() != grid.len() {
        return Err(Error::shape("transition Jacobian series", grid.len(), fx.len()));
    }
    let n = fx[0].nrows();
    let h = grid.dt;
    let mut phi0 = Vec::with_capacity(fx.len());
    phi0.push(Matrix::identity(n, n));
    for i in 0..fx.len() - 1 {
        let next = rk4_step(&phi0[i], &fx[i], &fx[i + 1], h, 1);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                callback: "transition propagation".into(),
                node: Some(i + 1),
            });
        }
        phi0.push(next);
    }

    let mut phi0_inv = Vec::with_capacity(phi0.len());
    let mut cond_max = 1.0_f64;
    for (i, phi) in phi0.iter().enumerate() {
        let inv = if i == 0 {
            Matrix::identity(n, n)
        } else {
            phi.clone().lu().try_inverse().ok_or(Error::IllConditionedTransition {
                node: i,
                cond: f64::INFINITY,
            })?
        };
        let cond = norm1(phi) * norm1(&inv);
        if !(cond <= MAX_TRANSITION_CONDITION) {
            return Err(Error::IllConditionedTransition { node: i, cond });
        }
        cond_max = cond_max.max(cond);
        phi0_inv.push(inv);
    }
    Ok(TransitionSet {
        phi0,
        phi0_inv,
        cond_max,
    })
}

/// Advance `phi` across one interval of length `h` split into `substeps`
/// RK4 steps, with `f_x` linear between `a0` and `a1`.
pub(crate) fn rk4_step(phi: &Matrix, a0: &Matrix, a1: &Matrix, h: f64, substeps: usize) -> Matrix {
    let hs = h / substeps as f64;
    let lerp = |theta: f64| a0 * (1.0 - theta) + a1 * theta;
    let mut p = phi.clone();
    for k in 0..substeps {
        let th0 = k as f64 / substeps as f64;
        let th1 = (k + 1) as f64 / substeps as f64;
        let (ab, am, ae) = (lerp(th0), lerp(0.5 * (th0 + th1)), lerp(th1));
        let k1 = &ab * &p;
        let k2 = &am * (&p + &k1 * (0.5 * hs));
        let k3 = &am * (&p + &k2 * (0.5 * hs));
        let k4 = &ae * (&p + &k3 * hs);
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hs / 6.0);
    }
    p
}

pub(crate) fn norm1(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl TransitionSet {
    pub fn len(&self) -> usize {
        self.phi0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi0.is_empty()
    }

    /// `Φ(t_i, t_j) = Φ(t_i, t0) Φ(t_j, t0)⁻¹`; the diagonal is exactly `I`.
    pub fn between(&self, i: usize, j: usize) -> Matrix {
        if i == j {
            let n = self.phi0[0].nrows();
            return Matrix::identity(n, n);
        }
        &self.phi0[i] * &self.phi0_inv[j]
    }

    /// `Φ(t_f, t_j)`.
    pub fn to_final(&self, j: usize) -> Matrix {
        self.between(self.phi0.len() - 1, j)
    }
}

/// Free-function form of [`TransitionSet::between`].
pub fn transition_between(ts: &TransitionSet, i: usize, j: usize) -> Result<Matrix> {
    if i >= ts.len() || j >= ts.len() {
        return Err(Error::shape("transition node index", ts.len(), i.max(j)));
    }
    Ok(ts.between(i, j))
}
