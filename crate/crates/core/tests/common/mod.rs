//! Independent reference implementations shared by the integration tests.
//!
//! The right-hand-side oracle works from analytic state trajectories on a
//! refined grid: adjoint and variational quantities come from RK4 solutions of
//! their defining linear ODEs, integrals from composite Simpson, and the
//! multipliers from brute-force subset enumeration. Nothing here reuses the
//! library's transition matrices, quadrature or active-set search.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use vemopt::multipliers::ConstraintSystem;
use vemopt::{GainSet, Matrix, ProblemDef, SolutionState, StateDerivative, Vector};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// `c0 + c1 s + c2 s² + amp sin(ω s + phase)` in normalized time `s = t / t_f`.
#[derive(Debug, Clone, Copy)]
pub struct Component {
    pub c: [f64; 3],
    pub amp: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Component {
    pub fn value(&self, s: f64) -> f64 {
        self.c[0] + self.c[1] * s + self.c[2] * s * s + self.amp * (self.omega * s + self.phase).sin()
    }

    pub fn slope(&self, s: f64) -> f64 {
        self.c[1] + 2.0 * self.c[2] * s + self.amp * self.omega * (self.omega * s + self.phase).cos()
    }

    pub fn random<R: Rng>(rng: &mut R, c0: (f64, f64), c1: (f64, f64), c2: (f64, f64), amp: f64) -> Self {
        Component {
            c: [
                rng.random_range(c0.0..=c0.1),
                rng.random_range(c1.0..=c1.1),
                rng.random_range(c2.0..=c2.1),
            ],
            amp: rng.random_range(0.0..=amp),
            omega: rng.random_range(0.5..=3.0),
            phase: rng.random_range(0.0..=std::f64::consts::TAU),
        }
    }
}

/// A smooth trajectory with analytic time derivatives.
#[derive(Debug, Clone)]
pub struct SmoothPath {
    pub tf: f64,
    pub x: Vec<Component>,
    pub u: Vec<Component>,
}

impl SmoothPath {
    pub fn x(&self, t: f64) -> Vector {
        Vector::from_iterator(self.x.len(), self.x.iter().map(|c| c.value(t / self.tf)))
    }

    pub fn xdot(&self, t: f64) -> Vector {
        Vector::from_iterator(self.x.len(), self.x.iter().map(|c| c.slope(t / self.tf) / self.tf))
    }

    pub fn u(&self, t: f64) -> Vector {
        Vector::from_iterator(self.u.len(), self.u.iter().map(|c| c.value(t / self.tf)))
    }

    pub fn udot(&self, t: f64) -> Vector {
        Vector::from_iterator(self.u.len(), self.u.iter().map(|c| c.slope(t / self.tf) / self.tf))
    }

    pub fn sample(&self, nodes: usize) -> SolutionState {
        let ts: Vec<f64> = (0..nodes).map(|i| self.tf * i as f64 / (nodes - 1) as f64).collect();
        SolutionState {
            x: ts.iter().map(|&t| self.x(t)).collect(),
            u: ts.iter().map(|&t| self.u(t)).collect(),
            tf: self.tf,
        }
    }
}

/// Composite Simpson on an odd number of equally spaced samples.
fn simpson<T>(values: &[T], h: f64) -> T
where
    T: Clone + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd sample count");
    let mut acc = values[0].clone() + values[n - 1].clone();
    for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc = acc + v.clone() * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

fn rk4<S, F>(y: &S, t: f64, h: f64, f: F) -> S
where
    S: Clone + std::ops::Add<Output = S> + std::ops::Mul<f64, Output = S>,
    F: Fn(f64, &S) -> S,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y.clone() + k1.clone() * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y.clone() + k2.clone() * (0.5 * h)));
    let k4 = f(t + h, &(y.clone() + k3.clone() * h));
    y.clone() + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Multipliers for candidate rows: every subset is tried, smallest first.
#[derive(Debug, Clone)]
pub struct EnumeratedMultipliers {
    pub pi_eq: Vector,
    pub pi_ineq: Vector,
    pub active: Vec<usize>,
}

/// Brute-force solution of the complementarity conditions.
///
/// `m_full`, `b` and `decay` cover the equality rows followed by the candidate
/// inequality rows `ineq_rows`.
pub fn enumerate_multipliers(
    q_eq: usize,
    q_ineq: usize,
    ineq_rows: &[usize],
    m_full: &Matrix,
    b: &Vector,
    decay: &Vector,
) -> Option<EnumeratedMultipliers> {
    let cand = ineq_rows.len();
    let mut masks: Vec<u32> = (0..(1u32 << cand)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let chosen: Vec<usize> = (0..cand).filter(|p| mask & (1 << p) != 0).collect();
        let rows: Vec<usize> = (0..q_eq).chain(chosen.iter().map(|p| q_eq + p)).collect();
        let k = rows.len();
        let pi = if k == 0 {
            Vector::zeros(0)
        } else {
            let mut m = Matrix::zeros(k, k);
            let mut rhs = Vector::zeros(k);
            for (a, &ra) in rows.iter().enumerate() {
                rhs[a] = -(b[ra] - decay[ra]);
                for (c, &rc) in rows.iter().enumerate() {
                    m[(a, c)] = m_full[(ra, rc)];
                }
            }
            match m.lu().solve(&rhs) {
                Some(pi) => pi,
                None => continue,
            }
        };
        let scale = 1.0 + pi.amax();
        if (q_eq..k).any(|a| pi[a] < -1e-10 * scale) {
            continue;
        }
        let violated = (0..cand).filter(|p| !chosen.contains(p)).any(|p| {
            let row = q_eq + p;
            let rate = -(rows.iter().enumerate().map(|(a, &r)| m_full[(row, r)] * pi[a]).sum::<f64>() + b[row]);
            rate + decay[row] > 1e-9 * (1.0 + b[row].abs() + decay[row].abs())
        });
        if violated {
            continue;
        }
        let mut pi_ineq = Vector::zeros(q_ineq);
        for (a, &p) in chosen.iter().enumerate() {
            pi_ineq[ineq_rows[p]] = pi[q_eq + a];
        }
        return Some(EnumeratedMultipliers {
            pi_eq: pi.rows(0, q_eq).into_owned(),
            pi_ineq,
            active: chosen.iter().map(|&p| ineq_rows[p]).collect(),
        });
    }
    None
}

/// A random constraint system with a symmetric positive-definite matrix.
pub fn random_system<R: Rng>(rng: &mut R) -> ConstraintSystem {
    let q_eq = rng.random_range(0..=2usize);
    let q_ineq = rng.random_range(1..=3usize);
    let ineq_rows: Vec<usize> = (0..q_ineq).filter(|_| rng.random_bool(0.75)).collect();
    let size = q_eq + ineq_rows.len();
    let a = Matrix::from_fn(size, size, |_, _| rng.random_range(-1.0..=1.0));
    let m_full = &a * a.transpose() + Matrix::identity(size, size) * rng.random_range(0.05..=1.0);
    let b = Vector::from_fn(size, |_, _| rng.random_range(-1.0..=1.0));
    let mut g = Vector::zeros(size);
    let mut decay = Vector::zeros(size);
    for r in 0..size {
        g[r] = if r < q_eq {
            rng.random_range(-1.0..=1.0)
        } else {
            rng.random_range(0.0..=1.0)
        };
        decay[r] = rng.random_range(0.05..=0.5) * g[r];
    }
    ConstraintSystem::from_parts(q_eq, q_ineq, ineq_rows, m_full, b, g, decay)
}

/// Right-hand side of the evolution equations on a `refine`×-refined grid,
/// reported at the coarse nodes of `nodes`.
pub fn reference_rhs(
    problem: &ProblemDef,
    path: &SmoothPath,
    gains: &GainSet,
    nodes: usize,
    refine: usize,
    mesh_convection: bool,
) -> StateDerivative {
    let n = problem.n;
    let tf = path.tf;
    let fine = refine * (nodes - 1) + 1;
    let h = tf / (fine - 1) as f64;
    let times: Vec<f64> = (0..fine).map(|k| k as f64 * h).collect();

    let a_of = |t: f64| problem.eval_jacobians(&path.x(t), &path.u(t), t).unwrap().0;
    let source = |t: f64| {
        let (x, u, xdot) = (path.x(t), path.u(t), path.xdot(t));
        let (fx, _) = problem.eval_jacobians(&x, &u, t).unwrap();
        let l = problem.eval_running_cost(&x, &u, t).unwrap();
        let phi = problem.eval_mayer(&x, t).unwrap();
        l.dx + phi.dtx + phi.dxx.transpose() * xdot + fx.transpose() * phi.dx
    };

    // Backward kernel: w' = -Aᵀ w - q, w(t_f) = 0.
    let mut w = vec![Vector::zeros(n); fine];
    for k in (1..fine).rev() {
        w[k - 1] = rk4(&w[k], times[k], -h, |t, w| -(a_of(t).transpose() * w) - source(t));
    }
    // Ψ(s) = Φ(t_f, s): Ψ' = -Ψ A, Ψ(t_f) = I.
    let mut psi = vec![Matrix::identity(n, n); fine];
    for k in (1..fine).rev() {
        psi[k - 1] = rk4(&psi[k], times[k], -h, |t, p| -(p * a_of(t)));
    }

    let mut fu = Vec::with_capacity(fine);
    let mut p_u_bar = Vec::with_capacity(fine);
    let mut e_f = Vec::with_capacity(fine);
    for (k, &t) in times.iter().enumerate() {
        let (x, u) = (path.x(t), path.u(t));
        let (_, b) = problem.eval_jacobians(&x, &u, t).unwrap();
        let l = problem.eval_running_cost(&x, &u, t).unwrap();
        let phi = problem.eval_mayer(&x, t).unwrap();
        p_u_bar.push(l.du + b.transpose() * (phi.dx + &w[k]));
        e_f.push(path.xdot(t) - problem.eval_dynamics(&x, &u, t).unwrap());
        fu.push(b);
    }
    let influence: Vec<Matrix> = (0..fine).map(|k| &psi[k] * &fu[k]).collect();
    let e_x0 = path.x(0.0) - &problem.x0;

    let gram: Vec<Matrix> = influence.iter().map(|b| b * &gains.k * b.transpose()).collect();
    let w_mat = simpson(&gram, h);
    let v_desc = simpson(
        &influence.iter().zip(&p_u_bar).map(|(b, p)| b * (&gains.k * p)).collect::<Vec<_>>(),
        h,
    );
    let v_init = &psi[0] * (&gains.k_x0 * &e_x0);
    let v_dyn = simpson(
        &psi.iter().zip(&e_f).map(|(p, e)| p * (&gains.k_f * e)).collect::<Vec<_>>(),
        h,
    );

    let xf = path.x(tf);
    let xdot_f = path.xdot(tf);
    let eq = problem.eval_terminal_eq(&xf, tf).unwrap();
    let ineq = problem.eval_terminal_ineq(&xf, tf).unwrap();
    let candidates: Vec<usize> = (0..problem.q_ineq).filter(|&i| ineq.value[i] >= 0.0).collect();
    let rows = problem.q_eq + candidates.len();
    let mut gx = Matrix::zeros(rows, n);
    let mut gt = Vector::zeros(rows);
    let mut decay = Vector::zeros(rows);
    for i in 0..problem.q_eq {
        gx.set_row(i, &eq.dx.row(i));
        gt[i] = eq.dt[i];
        decay[i] = (gains.k_ge.row(i) * &eq.value)[0];
    }
    for (p, &i) in candidates.iter().enumerate() {
        gx.set_row(problem.q_eq + p, &ineq.dx.row(i));
        gt[problem.q_eq + p] = ineq.dt[i];
        decay[problem.q_eq + p] = gains.k_gi[i] * ineq.value[i];
    }
    let k_tf = if problem.tf_free() { gains.k_tf } else { 0.0 };
    let l_f = problem.eval_running_cost(&xf, &path.u(tf), tf).unwrap();
    let phi_f = problem.eval_mayer(&xf, tf).unwrap();
    let a = &gx * &xdot_f + &gt;
    let c = l_f.value + phi_f.dt + phi_f.dx.dot(&xdot_f);
    let m_full = &gx * w_mat * gx.transpose() + &a * a.transpose() * k_tf;
    let b = &gx * (v_desc + v_init + v_dyn) + &a * (k_tf * c);
    let mult = enumerate_multipliers(problem.q_eq, problem.q_ineq, &candidates, &m_full, &b, &decay)
        .expect("reference multipliers exist");

    let nu = eq.dx.transpose() * &mult.pi_eq + ineq.dx.transpose() * &mult.pi_ineq;
    let du: Vec<Vector> = (0..fine)
        .map(|k| -(&gains.k * (&p_u_bar[k] + influence[k].transpose() * &nu)))
        .collect();
    let p_tf = c
        + mult.pi_eq.dot(&(&eq.dx * &xdot_f + &eq.dt))
        + mult.pi_ineq.dot(&(&ineq.dx * &xdot_f + &ineq.dt));
    let dtf = -k_tf * p_tf;

    // State rate: z' = A z + f_u u̇_τ - K_f e_f, z(0) = -K_x0 e_x0, stepping
    // over pairs of fine intervals so every stage lands on a fine node.
    let forcing = |k: usize| &fu[k] * &du[k] - &gains.k_f * &e_f[k];
    let mut dx = vec![Vector::zeros(n); fine];
    dx[0] = -(&gains.k_x0 * &e_x0);
    for k in (0..fine - 1).step_by(2) {
        let h2 = 2.0 * h;
        let (t0, t1, t2) = (times[k], times[k + 1], times[k + 2]);
        let (g0, g1, g2) = (forcing(k), forcing(k + 1), forcing(k + 2));
        let z = &dx[k];
        let k1 = a_of(t0) * z + &g0;
        let k2 = a_of(t1) * (z + &k1 * (0.5 * h2)) + &g1;
        let k3 = a_of(t1) * (z + &k2 * (0.5 * h2)) + &g1;
        let k4 = a_of(t2) * (z + &k3 * h2) + &g2;
        dx[k + 2] = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h2 / 6.0);
    }

    let coarse: Vec<usize> = (0..nodes).map(|i| i * refine).collect();
    let mut out = StateDerivative {
        dx: coarse.iter().map(|&k| dx[k].clone()).collect(),
        du: coarse.iter().map(|&k| du[k].clone()).collect(),
        dtf,
    };
    if problem.tf_free() && mesh_convection {
        for (i, &k) in coarse.iter().enumerate() {
            let s = times[k] / tf;
            out.dx[i] += path.xdot(times[k]) * (s * dtf);
            out.du[i] += path.udot(times[k]) * (s * dtf);
        }
    }
    out
}

/// `‖a - b‖∞ / ‖b‖∞` over the packed rates.
pub fn relative_gap(a: &StateDerivative, b: &StateDerivative) -> f64 {
    let mut diff: f64 = (a.dtf - b.dtf).abs();
    let mut scale: f64 = b.dtf.abs();
    for (p, q) in a.dx.iter().zip(&b.dx).chain(a.du.iter().zip(&b.du)) {
        diff = diff.max((p - q).amax());
        scale = scale.max(q.amax());
    }
    diff / scale
}
