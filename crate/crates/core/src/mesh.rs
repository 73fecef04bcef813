//! Uniform time grid, finite-difference time derivatives and trapezoidal
//! quadrature.
//!
//! Nodes sit at fixed normalized coordinates `s_i = i/(N-1)`; the physical
//! node times are re-spanned whenever the terminal time changes, so the node
//! count stays constant.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub tf: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub dt: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> usize {
        self.t.len() - 1
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::shape(what, self.len(), len));
        }
        Ok(())
    }
}

pub fn make_grid(nodes: usize, t0: f64, tf: f64) -> Result<Grid> {
    if nodes < 3 {
        return Err(Error::config(format!("grid needs at least 3 nodes, got {nodes}")));
    }
    if !(tf > t0) || !tf.is_finite() || !t0.is_finite() {
        return Err(Error::config(format!(
            "terminal time {tf} must be finite and exceed t0 = {t0}"
        )));
    }
    let last = (nodes - 1) as f64;
    let s: Vec<f64> = (0..nodes).map(|i| i as f64 / last).collect();
    let t = s.iter().map(|&si| t0 + si * (tf - t0)).collect();
    Ok(Grid {
        t0,
        tf,
        s,
        t,
        dt: (tf - t0) / last,
    })
}

/// Values that can be accumulated by the quadrature rules: scalars, vectors
/// and matrices.
pub trait Integrand: Clone {
    fn zeros_like(&self) -> Self;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
}

impl Integrand for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Integrand for DVector<f64> {
    fn zeros_like(&self) -> Self {
        DVector::zeros(self.len())
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        DVector::axpy(self, a, x, 1.0);
    }
}

impl Integrand for DMatrix<f64> {
    fn zeros_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        self.zip_apply(x, |s, xv| *s += a * xv);
    }
}

/// One trapezoid panel `acc += dt/2 (a + b)`; shared by every rule below so
/// the running and total integrals agree bitwise.
fn panel<T: Integrand>(acc: &mut T, half_dt: f64, a: &T, b: &T) {
    acc.axpy(half_dt, a);
    acc.axpy(half_dt, b);
}

/// `scale (b - a)`, exactly zero when `a == b`.
fn difference<T: Integrand>(b: &T, a: &T, scale: f64) -> T {
    let mut d = b.clone();
    d.axpy(-1.0, a);
    let mut out = a.zeros_like();
    out.axpy(scale, &d);
    out
}

/// Three-point stencil `scale (-3 a + 4 b - c)` written in differences.
fn one_sided<T: Integrand>(a: &T, b: &T, c: &T, scale: f64) -> T {
    let mut out = difference(b, a, 4.0 * scale);
    out.axpy(-1.0, &difference(c, a, scale));
    out
}

/// Second-order `∂/∂t` at every node: central differences inside, three-point
/// one-sided stencils at both ends.
pub fn time_derivative<T: Integrand>(values: &[T], grid: &Grid) -> Result<Vec<T>> {
    grid.check_len("time_derivative series", values.len())?;
    let n = values.len();
    let inv2h = 1.0 / (2.0 * grid.dt);
    let mut out = Vec::with_capacity(n);

    out.push(one_sided(&values[0], &values[1], &values[2], inv2h));
    for i in 1..n - 1 {
        out.push(difference(&values[i + 1], &values[i - 1], inv2h));
    }
    out.push(one_sided(&values[n - 1], &values[n - 2], &values[n - 3], -inv2h));
    Ok(out)
}

/// Composite trapezoid over `[t0, tf]`.
pub fn trapezoid<T: Integrand>(values: &[T], grid: &Grid) -> Result<T> {
    grid.check_len("trapezoid series", values.len())?;
    let half = 0.5 * grid.dt;
    let mut acc = values[0].zeros_like();
    for w in values.windows(2) {
        panel(&mut acc, half, &w[0], &w[1]);
    }
    Ok(acc)
}

/// Cumulative integrals `I_i = ∫_{t0}^{t_i}`, with `I_0 = 0`.
pub fn running_trapezoid<T: Integrand>(values: &[T], grid: &Grid) -> Result<Vec<T>> {
    grid.check_len("running_trapezoid series", values.len())?;
    let half = 0.5 * grid.dt;
    let mut acc = values[0].zeros_like();
    let mut out = Vec::with_capacity(values.len());
    out.push(acc.clone());
    for w in values.windows(2) {
        panel(&mut acc, half, &w[0], &w[1]);
        out.push(acc.clone());
    }
    Ok(out)
}

/// Tail integrals `R_i = ∫_{t_i}^{tf}`, with `R_{N-1} = 0`.
pub fn reverse_running_trapezoid<T: Integrand>(values: &[T], grid: &Grid) -> Result<Vec<T>> {
    grid.check_len("reverse_running_trapezoid series", values.len())?;
    let n = values.len();
    let half = 0.5 * grid.dt;
    let mut acc = values[n - 1].zeros_like();
    let mut out = vec![acc.clone(); n];
    for i in (0..n - 1).rev() {
        panel(&mut acc, half, &values[i + 1], &values[i]);
        out[i] = acc.clone();
    }
    Ok(out)
}
