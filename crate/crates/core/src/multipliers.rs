//! Lagrange/KKT multipliers for the terminal constraints.
//!
//! The multipliers make every equality constraint and every selected
//! inequality constraint decay at its prescribed first-order rate. The linear
//! system is assembled once over all candidate rows (equalities plus the
//! violated or active inequalities); the active-set search then works on
//! principal submatrices of it.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::evolution::{NodeData, SensitivityBundle};
use crate::mesh::trapezoid;
use crate::problem::{Matrix, ProblemDef, Vector};
use crate::transition::{norm1, TransitionSet};

/// Condition estimate above which the multiplier system counts as singular.
pub const MAX_SYSTEM_CONDITION: f64 = 1e12;

/// Evolution gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// m×m, control descent gain
    pub k: Matrix,
    /// n×n, initial-state error decay
    pub k_x0: Matrix,
    /// n×n, dynamics error decay
    pub k_f: Matrix,
    /// q_E×q_E, equality constraint decay
    pub k_ge: Matrix,
    /// per inequality constraint decay rates
    pub k_gi: Vector,
    /// terminal-time descent gain, 0 for a fixed horizon
    pub k_tf: f64,
}

impl GainSet {
    /// Scalar multiples of the identity for every matrix gain.
    pub fn uniform(problem: &ProblemDef, k: f64, k_x0: f64, k_f: f64, k_ge: f64, k_gi: f64, k_tf: f64) -> Self {
        let (n, m) = (problem.n, problem.m);
        GainSet {
            k: Matrix::identity(m, m) * k,
            k_x0: Matrix::identity(n, n) * k_x0,
            k_f: Matrix::identity(n, n) * k_f,
            k_ge: Matrix::identity(problem.q_eq, problem.q_eq) * k_ge,
            k_gi: Vector::from_element(problem.q_ineq, k_gi),
            k_tf,
        }
    }

    /// Check dimensions and definiteness against a problem.
    pub fn validate(&self, problem: &ProblemDef) -> Result<()> {
        let checks = [
            ("K", &self.k, problem.m),
            ("K_x0", &self.k_x0, problem.n),
            ("K_f", &self.k_f, problem.n),
            ("K_gE", &self.k_ge, problem.q_eq),
        ];
        for (name, gain, dim) in checks {
            if gain.nrows() != dim || gain.ncols() != dim {
                return Err(Error::config(format!(
                    "{name} must be {dim}x{dim}, got {}x{}",
                    gain.nrows(),
                    gain.ncols()
                )));
            }
            if dim > 0 && !(min_sym_eigenvalue(gain) > 0.0) {
                return Err(Error::config(format!("{name} not positive-definite")));
            }
        }
        if self.k_gi.len() != problem.q_ineq {
            return Err(Error::config(format!(
                "k_gI must have {} entries, got {}",
                problem.q_ineq,
                self.k_gi.len()
            )));
        }
        if self.k_gi.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::config("k_gI not positive"));
        }
        if !(self.k_tf >= 0.0) || !self.k_tf.is_finite() {
            return Err(Error::config("k_tf must be nonnegative"));
        }
        Ok(())
    }

    /// `k_tf`, or 0 when the problem has a fixed horizon.
    pub fn effective_k_tf(&self, problem: &ProblemDef) -> f64 {
        if problem.tf_free() {
            self.k_tf
        } else {
            0.0
        }
    }
}

/// Smallest eigenvalue of the symmetric part.
pub(crate) fn min_sym_eigenvalue(a: &Matrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub(crate) fn max_sym_eigenvalue(a: &Matrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.max()
}

/// Inequality index sets: `violated` holds every `i` with `g_i ≥ 0`,
/// `active` the subset treated as equalities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexSets {
    pub violated: Vec<usize>,
    pub active: Vec<usize>,
}

impl IndexSets {
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Bit `i` set for each active inequality `i`.
    pub fn active_mask(&self) -> u64 {
        self.active.iter().fold(0, |m, &i| m | (1 << i))
    }
}

/// Boundary values `g_i = 0` are included.
pub fn compute_index_sets(g_ineq: &Vector) -> IndexSets {
    IndexSets {
        violated: g_ineq
            .iter()
            .enumerate()
            .filter(|(_, &g)| g >= 0.0)
            .map(|(i, _)| i)
            .collect(),
        active: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierResult {
    pub pi_eq: Vector,
    /// Zero outside the active set.
    pub pi_ineq: Vector,
    pub sets: IndexSets,
    /// The solved system `M π = -r` over equalities plus active inequalities.
    pub m: Matrix,
    pub r: Vector,
    pub iterations: usize,
    pub enumerated: bool,
}

impl MultiplierResult {
    /// No constraints at all.
    pub fn empty(q_eq: usize, q_ineq: usize) -> Self {
        MultiplierResult {
            pi_eq: Vector::zeros(q_eq),
            pi_ineq: Vector::zeros(q_ineq),
            sets: IndexSets::default(),
            m: Matrix::zeros(0, 0),
            r: Vector::zeros(0),
            iterations: 0,
            enumerated: false,
        }
    }
}

/// Constraint rates as an affine map of the multipliers.
///
/// For candidate rows `c` (all equalities, then the listed inequalities) the
/// rate of `g_c` under multipliers `π` on a row subset `A` is
/// `-(M_full[c, A] π + b[c])`; the decay target is `-k_c g_c`.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub q_eq: usize,
    pub q_ineq: usize,
    /// Original inequality index of each candidate inequality row.
    pub ineq_rows: Vec<usize>,
    pub m_full: Matrix,
    pub b: Vector,
    pub g: Vector,
    pub decay: Vector,
}

impl ConstraintSystem {
    /// Assemble the full candidate system from the current evaluation.
    pub fn build(
        problem: &ProblemDef,
        nodes: &NodeData,
        ts: &TransitionSet,
        gains: &GainSet,
        bundle: &SensitivityBundle,
        ineq_rows: &[usize],
    ) -> Result<Self> {
        let n = problem.n;
        let q_eq = problem.q_eq;
        let rows = q_eq + ineq_rows.len();
        let last = nodes.grid.last();

        let mut gx = Matrix::zeros(rows, n);
        let mut gt = Vector::zeros(rows);
        let mut g = Vector::zeros(rows);
        let mut decay = Vector::zeros(rows);
        for i in 0..q_eq {
            gx.row_mut(i).copy_from(&nodes.eq.dx.row(i));
            gt[i] = nodes.eq.dt[i];
            g[i] = nodes.eq.value[i];
        }
        let ge_decay = &gains.k_ge * &nodes.eq.value;
        decay.rows_mut(0, q_eq).copy_from(&ge_decay);
        for (p, &i) in ineq_rows.iter().enumerate() {
            if i >= problem.q_ineq {
                return Err(Error::shape("inequality row index", problem.q_ineq, i));
            }
            gx.row_mut(q_eq + p).copy_from(&nodes.ineq.dx.row(i));
            gt[q_eq + p] = nodes.ineq.dt[i];
            g[q_eq + p] = nodes.ineq.value[i];
            decay[q_eq + p] = gains.k_gi[i] * nodes.ineq.value[i];
        }

        let k_tf = gains.effective_k_tf(problem);
        let xdot_f = &bundle.xdot[last];
        let a = &gx * xdot_f + &gt;
        let mayer_f = &nodes.mayer[last];
        let c = nodes.running[last].value + mayer_f.dt + mayer_f.dx.dot(xdot_f);

        let gram: Vec<Matrix> = bundle
            .influence
            .iter()
            .map(|b| b * &gains.k * b.transpose())
            .collect();
        let w = trapezoid(&gram, &nodes.grid)?;
        let descent: Vec<Vector> = bundle
            .influence
            .iter()
            .zip(&bundle.p_u_bar)
            .map(|(b, p)| b * (&gains.k * p))
            .collect();
        let v_descent = trapezoid(&descent, &nodes.grid)?;
        let v_initial = &ts.phi0[last] * (&gains.k_x0 * &bundle.e_x0);
        let pulled: Vec<Vector> = bundle
            .e_f
            .iter()
            .zip(&ts.phi0_inv)
            .map(|(e, inv)| inv * (&gains.k_f * e))
            .collect();
        let v_dynamics = &ts.phi0[last] * trapezoid(&pulled, &nodes.grid)?;

        let m_full = &gx * w * gx.transpose() + &a * a.transpose() * k_tf;
        let b = &gx * (v_descent + v_initial + v_dynamics) + &a * (k_tf * c);

        Ok(ConstraintSystem {
            q_eq,
            q_ineq: problem.q_ineq,
            ineq_rows: ineq_rows.to_vec(),
            m_full,
            b,
            g,
            decay,
        })
    }

    /// Build directly from the affine data; used for synthetic systems.
    pub fn from_parts(
        q_eq: usize,
        q_ineq: usize,
        ineq_rows: Vec<usize>,
        m_full: Matrix,
        b: Vector,
        g: Vector,
        decay: Vector,
    ) -> Self {
        ConstraintSystem {
            q_eq,
            q_ineq,
            ineq_rows,
            m_full,
            b,
            g,
            decay,
        }
    }

    fn rows_for(&self, active: &[usize]) -> Vec<usize> {
        (0..self.q_eq).chain(active.iter().map(|p| self.q_eq + p)).collect()
    }

    /// `(M, r)` restricted to the equalities and the active candidate
    /// positions `active` (indices into `ineq_rows`).
    pub fn assemble(&self, active: &[usize]) -> (Matrix, Vector) {
        let rows = self.rows_for(active);
        let k = rows.len();
        let m = Matrix::from_fn(k, k, |i, j| self.m_full[(rows[i], rows[j])]);
        let r = Vector::from_fn(k, |i, _| self.b[rows[i]] - self.decay[rows[i]]);
        (m, r)
    }

    /// Solve `M π = -r` on a row subset.
    pub fn solve(&self, active: &[usize]) -> Result<(Matrix, Vector, Vector)> {
        let (m, r) = self.assemble(active);
        if m.nrows() == 0 {
            return Ok((m, r, Vector::zeros(0)));
        }
        let inv = m
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::Controllability { cond: f64::INFINITY })?;
        let cond = norm1(&m) * norm1(&inv);
        if !(cond <= MAX_SYSTEM_CONDITION) {
            return Err(Error::Controllability { cond });
        }
        let pi = -(&inv * &r);
        Ok((m, r, pi))
    }

    /// Rates of every candidate constraint for multipliers `pi` on `active`.
    pub fn rates(&self, active: &[usize], pi: &Vector) -> Vector {
        let rows = self.rows_for(active);
        Vector::from_fn(self.m_full.nrows(), |c, _| {
            let coupled: f64 = rows.iter().zip(pi.iter()).map(|(&r, p)| self.m_full[(c, r)] * p).sum();
            -(coupled + self.b[c])
        })
    }

    fn descent_slack(&self, rates: &Vector, position: usize) -> (f64, f64) {
        let row = self.q_eq + position;
        let slack = rates[row] + self.decay[row];
        let scale = 1.0 + self.b[row].abs() + self.decay[row].abs();
        (slack, 1e-9 * scale)
    }

    /// Check both optimality conditions for a candidate active set.
    fn admissible(&self, active: &[usize], pi: &Vector) -> bool {
        let tol = 1e-12 * (1.0 + pi.amax());
        if active.iter().enumerate().any(|(k, _)| pi[self.q_eq + k] < -tol) {
            return false;
        }
        let rates = self.rates(active, pi);
        (0..self.ineq_rows.len())
            .filter(|p| !active.contains(p))
            .all(|p| {
                let (slack, tol) = self.descent_slack(&rates, p);
                slack <= tol
            })
    }

    fn finish(&self, active: Vec<usize>, m: Matrix, r: Vector, pi: Vector, iterations: usize, enumerated: bool) -> MultiplierResult {
        let mut pi_ineq = Vector::zeros(self.q_ineq);
        for (k, &p) in active.iter().enumerate() {
            pi_ineq[self.ineq_rows[p]] = pi[self.q_eq + k].max(0.0);
        }
        let mut active_idx: Vec<usize> = active.iter().map(|&p| self.ineq_rows[p]).collect();
        active_idx.sort_unstable();
        MultiplierResult {
            pi_eq: pi.rows(0, self.q_eq).into_owned(),
            pi_ineq,
            sets: IndexSets {
                violated: self.ineq_rows.clone(),
                active: active_idx,
            },
            m,
            r,
            iterations,
            enumerated,
        }
    }
}

/// Drop/re-add active-set iteration, falling back to exhaustive enumeration
/// when a candidate set repeats.
pub fn solve_active_set(system: &ConstraintSystem) -> Result<MultiplierResult> {
    let n_cand = system.ineq_rows.len();
    let mut active: Vec<usize> = (0..n_cand).collect();
    let mut seen: Vec<Vec<usize>> = Vec::new();
    let mut iterations = 0;
    loop {
        if seen.contains(&active) {
            return enumerate_active_sets(system, iterations);
        }
        seen.push(active.clone());
        iterations += 1;

        let (m, r, pi) = system.solve(&active)?;
        let tol = 1e-12 * (1.0 + pi.amax());
        let most_negative = active
            .iter()
            .enumerate()
            .map(|(k, &p)| (p, pi[system.q_eq + k]))
            .filter(|&(_, v)| v < -tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((p, _)) = most_negative {
            active.retain(|&q| q != p);
            continue;
        }

        let rates = system.rates(&active, &pi);
        let violators: Vec<usize> = (0..n_cand)
            .filter(|p| !active.contains(p))
            .filter(|&p| {
                let (slack, tol) = system.descent_slack(&rates, p);
                slack > tol
            })
            .collect();
        if violators.is_empty() {
            return Ok(system.finish(active, m, r, pi, iterations, false));
        }
        active.extend(violators);
        active.sort_unstable();
    }
}

/// Try every subset of the candidate inequalities, smallest first, and return
/// the first that satisfies both conditions.
pub fn enumerate_active_sets(system: &ConstraintSystem, prior_iterations: usize) -> Result<MultiplierResult> {
    let n_cand = system.ineq_rows.len();
    if n_cand > 20 {
        return Err(Error::DegenerateActiveSet);
    }
    let mut subsets: Vec<Vec<usize>> = (0u32..(1 << n_cand))
        .map(|mask| (0..n_cand).filter(|p| mask & (1 << p) != 0).collect())
        .collect();
    subsets.sort_by_key(|s: &Vec<usize>| s.len());
    let mut iterations = prior_iterations;
    for active in subsets {
        iterations += 1;
        let (m, r, pi) = match system.solve(&active) {
            Ok(sol) => sol,
            Err(Error::Controllability { .. }) => continue,
            Err(e) => return Err(e),
        };
        if system.admissible(&active, &pi) {
            return Ok(system.finish(active, m, r, pi, iterations, true));
        }
    }
    Err(Error::DegenerateActiveSet)
}

/// `(M, r)` for the active set recorded in `sets`.
pub fn assemble_system(
    problem: &ProblemDef,
    nodes: &NodeData,
    ts: &TransitionSet,
    gains: &GainSet,
    bundle: &SensitivityBundle,
    sets: &IndexSets,
) -> Result<(Matrix, Vector)> {
    let system = ConstraintSystem::build(problem, nodes, ts, gains, bundle, &sets.violated)?;
    let positions: Vec<usize> = sets
        .active
        .iter()
        .map(|i| {
            sets.violated
                .iter()
                .position(|v| v == i)
                .ok_or_else(|| Error::config(format!("active index {i} is not in the violated set")))
        })
        .collect::<Result<_>>()?;
    Ok(system.assemble(&positions))
}
