//! Adaptive Dormand–Prince 5(4) integration in variation time.

use crate::error::{Error, Result};
use crate::problem::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub tau_max: f64,
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub sample_interval: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-3,
            atol: 1e-6,
            tau_max: 300.0,
            h0: 1e-2,
            h_min: 1e-10,
            h_max: 30.0,
            sample_interval: 0.1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("h0", self.h0),
            ("h_min", self.h_min),
            ("h_max", self.h_max),
            ("sample_interval", self.sample_interval),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tau_max >= 0.0) || !self.tau_max.is_finite() {
            return Err(Error::config(format!("tau_max must be nonnegative, got {}", self.tau_max)));
        }
        if self.h_min > self.h_max {
            return Err(Error::config(format!("h_min {} exceeds h_max {}", self.h_min, self.h_max)));
        }
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One attempted step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub y_next: Vector,
    /// Derivative at `y_next`; reused as the first stage of the next step.
    pub dy_next: Vector,
    pub h_next: f64,
    pub accepted: bool,
    pub err_norm: f64,
}

/// One embedded-pair step from `(tau, y)` with known derivative `dy`.
pub fn rk45_step<F>(rhs: &mut F, y: &Vector, dy: &Vector, tau: f64, h: f64, cfg: &IntegratorConfig) -> Result<Step>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
{
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    k.push(dy.clone());
    for s in 1..7 {
        let mut ys = y.clone();
        for (j, &a) in A[s].iter().enumerate() {
            if a != 0.0 {
                ys.axpy(h * a, &k[j], 1.0);
            }
        }
        k.push(rhs(tau + C[s] * h, &ys)?);
    }
    let mut y_next = y.clone();
    for (j, &b) in A[6].iter().enumerate() {
        if b != 0.0 {
            y_next.axpy(h * b, &k[j], 1.0);
        }
    }
    let mut err_vec = Vector::zeros(y.len());
    for (j, &e) in E.iter().enumerate() {
        if e != 0.0 {
            err_vec.axpy(h * e, &k[j], 1.0);
        }
    }
    let err_norm = err_vec
        .iter()
        .zip(y.iter().zip(y_next.iter()))
        .map(|(e, (a, b))| e.abs() / (cfg.atol + cfg.rtol * a.abs().max(b.abs())))
        .fold(0.0, f64::max);
    let factor = if err_norm == 0.0 {
        5.0
    } else if err_norm.is_finite() {
        (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
    } else {
        0.2
    };
    Ok(Step {
        y_next,
        dy_next: k.pop().unwrap_or_default(),
        h_next: h * factor,
        accepted: err_norm <= 1.0,
        err_norm,
    })
}

/// Cubic Hermite interpolation on one accepted step.
fn hermite(y0: &Vector, dy0: &Vector, y1: &Vector, dy1: &Vector, h: f64, theta: f64) -> Vector {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    y0 * h00 + dy0 * (h * h10) + y1 * h01 + dy1 * (h * h11)
}

/// Result of a (possibly aborted) integration.
#[derive(Debug)]
pub struct IntegrationRun<T> {
    pub y: Vector,
    pub tau: f64,
    pub samples: Vec<T>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Set when the run stopped early; `y`, `tau` and `samples` then hold the
    /// last accepted point and the partial log.
    pub error: Option<Error>,
}

impl<T> IntegrationRun<T> {
    pub fn into_result(self) -> Result<(Vector, Vec<T>)> {
        match self.error {
            Some(e) => Err(e),
            None => Ok((self.y, self.samples)),
        }
    }
}

/// Integrate from `τ = 0` to `cfg.tau_max`, calling `on_sample` at every
/// multiple of `cfg.sample_interval` and at `tau_max`.
pub fn integrate<F, S, T>(mut rhs: F, y0: &Vector, cfg: &IntegratorConfig, mut on_sample: S) -> IntegrationRun<T>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
    S: FnMut(f64, &Vector) -> Result<T>,
{
    let mut run = IntegrationRun {
        y: y0.clone(),
        tau: 0.0,
        samples: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
        error: None,
    };
    if let Err(e) = cfg.validate() {
        run.error = Some(e);
        return run;
    }
    let dt_sample = cfg.sample_interval;
    let end_slack = 1e-9 * dt_sample;
    let sample_time = |k: usize| {
        let t = k as f64 * dt_sample;
        if t > cfg.tau_max - end_slack {
            cfg.tau_max
        } else {
            t
        }
    };
    macro_rules! sample {
        ($tau:expr, $y:expr) => {
            match on_sample($tau, $y) {
                Ok(v) => run.samples.push(v),
                Err(e) => {
                    run.error = Some(e);
                    return run;
                }
            }
        };
    }

    let mut dy = match rhs(0.0, &run.y) {
        Ok(d) => d,
        Err(e) => {
            run.error = Some(e);
            return run;
        }
    };
    sample!(0.0, &run.y);
    let mut next_sample = 1usize;
    let mut h = cfg.h0.clamp(cfg.h_min, cfg.h_max);

    while run.tau < cfg.tau_max - end_slack {
        let remaining = cfg.tau_max - run.tau;
        let h_try = h.min(remaining);
        let step = match rk45_step(&mut rhs, &run.y, &dy, run.tau, h_try, cfg) {
            Ok(s) => s,
            Err(e) => {
                run.error = Some(e);
                return run;
            }
        };
        if !step.accepted {
            run.rejected_steps += 1;
            if h_try <= cfg.h_min {
                run.error = Some(Error::StepFailure {
                    tau: run.tau,
                    h: h_try,
                    err: step.err_norm,
                });
                return run;
            }
            h = step.h_next.max(cfg.h_min);
            continue;
        }
        run.accepted_steps += 1;
        let tau_next = if h_try == remaining { cfg.tau_max } else { run.tau + h_try };
        while sample_time(next_sample) <= tau_next + end_slack && sample_time(next_sample - 1) < cfg.tau_max {
            let ts = sample_time(next_sample);
            let theta = ((ts - run.tau) / h_try).clamp(0.0, 1.0);
            let ys = if theta >= 1.0 {
                step.y_next.clone()
            } else {
                hermite(&run.y, &dy, &step.y_next, &step.dy_next, h_try, theta)
            };
            sample!(ts, &ys);
            next_sample += 1;
        }
        run.y = step.y_next;
        dy = step.dy_next;
        run.tau = tau_next;
        h = step.h_next.clamp(cfg.h_min, cfg.h_max);
    }
    run
}
