//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::evolution::SolutionState;
use crate::integrator::IntegratorConfig;
use crate::mesh::make_grid;
use crate::multipliers::GainSet;
use crate::problem::{builtin, FinalTime, Matrix, ProblemDef, Vector};

pub const OUTPUT_DIR_ENV: &str = "VEMOPT_OUTPUT_DIR";
pub const DEFAULT_SNAPSHOT_TAUS: [f64; 6] = [0.0, 3.0, 10.0, 30.0, 100.0, 300.0];

/// A gain given either as a scalar multiple of the identity or as the
/// diagonal entries.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GainValue {
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl GainValue {
    fn diagonal(&self, key: &str, dim: usize) -> Result<Vector> {
        match self {
            GainValue::Scalar(v) => Ok(Vector::from_element(dim, *v)),
            GainValue::Diagonal(d) if d.len() == dim => Ok(Vector::from_column_slice(d)),
            GainValue::Diagonal(d) => Err(Error::config(format!("{key}: expected {dim} diagonal entries, got {}", d.len()))),
        }
    }

    fn matrix(&self, key: &str, dim: usize) -> Result<Matrix> {
        Ok(Matrix::from_diagonal(&self.diagonal(key, dim)?))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: String,
    y_bound: Option<f64>,
    nodes: usize,
    #[serde(rename = "K")]
    k: Option<GainValue>,
    #[serde(rename = "K_x0")]
    k_x0: Option<GainValue>,
    #[serde(rename = "K_f")]
    k_f: Option<GainValue>,
    #[serde(rename = "K_gE")]
    k_ge: Option<GainValue>,
    #[serde(rename = "k_gI")]
    k_gi: Option<GainValue>,
    k_tf: Option<f64>,
    x_guess: Option<Vec<f64>>,
    u_guess: Option<Vec<f64>>,
    u_guess_slope: Option<Vec<f64>>,
    tf0: Option<f64>,
    guess_file: Option<PathBuf>,
    rtol: Option<f64>,
    atol: Option<f64>,
    tau_max: Option<f64>,
    h0: Option<f64>,
    h_min: Option<f64>,
    h_max: Option<f64>,
    sample_interval: Option<f64>,
    mesh_convection: Option<bool>,
    output_dir: Option<PathBuf>,
    snapshot_taus: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Guess {
    /// `x ≡ x`, `u(t) = u + u_slope (t - t0)`.
    Constant { x: Vector, u: Vector, u_slope: Vector },
    /// CSV with columns `t, x1..xn, u1..um`; extra columns are ignored.
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem: ProblemDef,
    pub y_bound: Option<f64>,
    pub nodes: usize,
    pub gains: GainSet,
    pub guess: Guess,
    pub tf0: Option<f64>,
    pub integrator: IntegratorConfig,
    /// Whether `h_max` was set explicitly rather than derived from `tau_max`.
    pub h_max_explicit: bool,
    pub mesh_convection: bool,
    pub output_dir: PathBuf,
    pub snapshot_taus: Vec<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tau_max: Option<f64>,
    pub nodes: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub mesh_convection: Option<bool>,
    pub output_dir: Option<PathBuf>,
}

fn default_h_max(tau_max: f64) -> f64 {
    if tau_max > 0.0 {
        0.1 * tau_max
    } else {
        1.0
    }
}

pub fn parse_config(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

/// Parse configuration text; relative `guess_file` paths resolve against
/// `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
    let problem = builtin(&raw.problem, raw.y_bound)?;
    let (n, m) = (problem.n, problem.m);

    let gain = |v: &Option<GainValue>| v.clone().unwrap_or(GainValue::Scalar(0.1));
    let gains = GainSet {
        k: gain(&raw.k).matrix("K", m)?,
        k_x0: gain(&raw.k_x0).matrix("K_x0", n)?,
        k_f: gain(&raw.k_f).matrix("K_f", n)?,
        k_ge: gain(&raw.k_ge).matrix("K_gE", problem.q_eq)?,
        k_gi: gain(&raw.k_gi).diagonal("k_gI", problem.q_ineq)?,
        k_tf: raw.k_tf.unwrap_or(if problem.tf_free() { 0.05 } else { 0.0 }),
    };
    gains.validate(&problem)?;

    let vector = |key: &str, v: &Option<Vec<f64>>, dim: usize| -> Result<Vector> {
        match v {
            None => Ok(Vector::zeros(dim)),
            Some(v) if v.len() == 1 => Ok(Vector::from_element(dim, v[0])),
            Some(v) if v.len() == dim => Ok(Vector::from_column_slice(v)),
            Some(v) => Err(Error::config(format!("{key}: expected {dim} entries, got {}", v.len()))),
        }
    };
    let guess = match &raw.guess_file {
        Some(file) => {
            if raw.x_guess.is_some() || raw.u_guess.is_some() || raw.u_guess_slope.is_some() {
                return Err(Error::config("guess_file cannot be combined with x_guess/u_guess/u_guess_slope"));
            }
            Guess::File(base.join(file))
        }
        None => Guess::Constant {
            x: vector("x_guess", &raw.x_guess, n)?,
            u: vector("u_guess", &raw.u_guess, m)?,
            u_slope: vector("u_guess_slope", &raw.u_guess_slope, m)?,
        },
    };
    if problem.tf_free() && raw.tf0.is_none() && raw.guess_file.is_none() {
        return Err(Error::config("tf0: required for a free terminal time"));
    }

    let defaults = IntegratorConfig::default();
    let tau_max = raw.tau_max.unwrap_or(defaults.tau_max);
    let integrator = IntegratorConfig {
        rtol: raw.rtol.unwrap_or(defaults.rtol),
        atol: raw.atol.unwrap_or(defaults.atol),
        tau_max,
        h0: raw.h0.unwrap_or(defaults.h0),
        h_min: raw.h_min.unwrap_or(defaults.h_min),
        h_max: raw.h_max.unwrap_or(default_h_max(tau_max)),
        sample_interval: raw.sample_interval.unwrap_or(defaults.sample_interval),
    };
    let spec = RunSpec {
        problem,
        y_bound: raw.y_bound,
        nodes: raw.nodes,
        gains,
        guess,
        tf0: raw.tf0,
        integrator,
        h_max_explicit: raw.h_max.is_some(),
        mesh_convection: raw.mesh_convection.unwrap_or(true),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        snapshot_taus: raw.snapshot_taus.unwrap_or_else(|| DEFAULT_SNAPSHOT_TAUS.to_vec()),
    };
    spec.validate()?;
    Ok(spec)
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 3 {
            return Err(Error::config(format!("nodes: must be at least 3, got {}", self.nodes)));
        }
        self.integrator.validate()?;
        if let Some(tf0) = self.tf0 {
            if !(tf0 > self.problem.t0) {
                return Err(Error::config(format!("tf0: must exceed t0 = {}", self.problem.t0)));
            }
        }
        Ok(())
    }

    /// Flag values first, then the environment, then the file.
    pub fn apply(mut self, overrides: &Overrides, env_output_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(tau_max) = overrides.tau_max {
            self.integrator.tau_max = tau_max;
            if !self.h_max_explicit {
                self.integrator.h_max = default_h_max(tau_max);
            }
        }
        if let Some(nodes) = overrides.nodes {
            self.nodes = nodes;
        }
        if let Some(rtol) = overrides.rtol {
            self.integrator.rtol = rtol;
        }
        if let Some(atol) = overrides.atol {
            self.integrator.atol = atol;
        }
        if let Some(mesh) = overrides.mesh_convection {
            self.mesh_convection = mesh;
        }
        if let Some(dir) = overrides.output_dir.clone().or(env_output_dir) {
            self.output_dir = dir;
        }
        self.validate()?;
        Ok(self)
    }

    /// The starting trajectory on the configured grid.
    pub fn initial_state(&self) -> Result<SolutionState> {
        match &self.guess {
            Guess::Constant { x, u, u_slope } => {
                let tf = self.tf0.unwrap_or(match self.problem.final_time {
                    FinalTime::Fixed(t) => t,
                    FinalTime::Free => f64::NAN,
                });
                SolutionState::constant_guess(&self.problem, self.nodes, x, u, u_slope, tf)
            }
            Guess::File(path) => guess_from_file(&self.problem, self.nodes, path, self.tf0),
        }
    }
}

/// Linear interpolation of a trajectory file onto the normalized grid.
fn guess_from_file(problem: &ProblemDef, nodes: usize, path: &Path, tf0: Option<f64>) -> Result<SolutionState> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::config(format!("guess_file: missing column {name}")))
    };
    let t_col = column("t")?;
    let x_cols: Vec<usize> = (1..=problem.n).map(|i| column(&format!("x{i}"))).collect::<Result<_>>()?;
    let u_cols: Vec<usize> = (1..=problem.m).map(|i| column(&format!("u{i}"))).collect::<Result<_>>()?;

    let mut rows: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |c: usize| -> Result<f64> {
            record
                .get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::config(format!("guess_file: bad number in row {}", rows.len() + 1)))
        };
        rows.push((
            field(t_col)?,
            x_cols.iter().map(|&c| field(c)).collect::<Result<_>>()?,
            u_cols.iter().map(|&c| field(c)).collect::<Result<_>>()?,
        ));
    }
    if rows.len() < 2 {
        return Err(Error::config("guess_file: needs at least two rows"));
    }
    if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::config("guess_file: t must be strictly increasing"));
    }
    let (t_first, t_last) = (rows[0].0, rows[rows.len() - 1].0);
    let tf = match problem.final_time {
        FinalTime::Fixed(t) => t,
        FinalTime::Free => tf0.unwrap_or(t_last),
    };
    let grid = make_grid(nodes, problem.t0, tf)?;
    let mut x = Vec::with_capacity(nodes);
    let mut u = Vec::with_capacity(nodes);
    let mut k = 0;
    for &s in &grid.s {
        let t = t_first + s * (t_last - t_first);
        while k + 2 < rows.len() && rows[k + 1].0 < t {
            k += 1;
        }
        let (a, b) = (&rows[k], &rows[k + 1]);
        let w = ((t - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
        let lerp = |p: &[f64], q: &[f64]| Vector::from_iterator(p.len(), p.iter().zip(q).map(|(p, q)| p + w * (q - p)));
        x.push(lerp(&a.1, &b.1));
        u.push(lerp(&a.2, &b.2));
    }
    Ok(SolutionState { x, u, tf })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::config(format!("guess_file {}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = r#"
problem = "double_integrator"
nodes = 41
K = 0.1
K_x0 = 0.1
K_f = 0.1
K_gE = 0.1
x_guess = [0.5, 0.5]
u_guess = [0.0]
"#;

    #[test]
    fn example1_defaults() {
        let spec = parse_config_str(EXAMPLE1, Path::new(".")).unwrap();
        assert_eq!(spec.nodes, 41);
        assert_eq!(spec.gains.k, Matrix::from_element(1, 1, 0.1));
        assert_eq!(spec.gains.k_x0, Matrix::identity(2, 2) * 0.1);
        assert_eq!(spec.gains.k_tf, 0.0);
        assert_eq!(spec.integrator.rtol, 1e-3);
        assert_eq!(spec.integrator.atol, 1e-6);
        assert_eq!(spec.integrator.tau_max, 300.0);
        assert!(spec.mesh_convection);
        assert_eq!(spec.snapshot_taus, DEFAULT_SNAPSHOT_TAUS.to_vec());
        let s = spec.initial_state().unwrap();
        assert_eq!(s.tf, 2.0);
        assert!(s.x.iter().all(|x| x == &Vector::from_element(2, 0.5)));
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = format!("{EXAMPLE1}\nbogus = 1\n");
        let err = parse_config_str(&unknown, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert_eq!(err.exit_code(), 2);

        let negative = EXAMPLE1.replace("K_x0 = 0.1", "K_x0 = -0.1");
        let err = parse_config_str(&negative, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("K_x0 not positive-definite"), "{err}");

        let wrong = EXAMPLE1.replace("double_integrator", "pendulum");
        assert!(parse_config_str(&wrong, Path::new(".")).is_err());

        let few = EXAMPLE1.replace("nodes = 41", "nodes = 2");
        assert!(parse_config_str(&few, Path::new(".")).is_err());

        let diag = EXAMPLE1.replace("K_f = 0.1", "K_f = [0.1, 0.2, 0.3]");
        assert!(parse_config_str(&diag, Path::new(".")).is_err());

        assert!(parse_config_str("problem = [", Path::new(".")).is_err());
        let missing = parse_config(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert_eq!(missing.exit_code(), 4);
    }

    #[test]
    fn diagonal_gains_and_overrides() {
        let text = EXAMPLE1.replace("K_f = 0.1", "K_f = [0.1, 0.2]");
        let spec = parse_config_str(&text, Path::new(".")).unwrap();
        assert_eq!(spec.gains.k_f[(1, 1)], 0.2);

        let o = Overrides {
            tau_max: Some(10.0),
            nodes: Some(21),
            mesh_convection: Some(false),
            ..Overrides::default()
        };
        let spec = spec.apply(&o, Some(PathBuf::from("env_dir"))).unwrap();
        assert_eq!(spec.integrator.tau_max, 10.0);
        assert_eq!(spec.integrator.h_max, 1.0);
        assert_eq!(spec.nodes, 21);
        assert!(!spec.mesh_convection);
        assert_eq!(spec.output_dir, PathBuf::from("env_dir"));

        let o = Overrides {
            output_dir: Some(PathBuf::from("flag_dir")),
            ..Overrides::default()
        };
        let spec = spec.apply(&o, Some(PathBuf::from("env_dir"))).unwrap();
        assert_eq!(spec.output_dir, PathBuf::from("flag_dir"));
    }

    #[test]
    fn free_horizon_needs_tf0() {
        let text = r#"
problem = "brachistochrone"
y_bound = -2.0
nodes = 11
x_guess = [1.0, 1.0, 1.0]
"#;
        assert!(parse_config_str(text, Path::new(".")).is_err());
        let spec = parse_config_str(&format!("{text}tf0 = 1.0\nu_guess_slope = [1.0]\n"), Path::new(".")).unwrap();
        assert_eq!(spec.gains.k_tf, 0.05);
        let s = spec.initial_state().unwrap();
        assert_eq!(s.tf, 1.0);
        assert_eq!(s.u[10][0], 1.0);
    }

    #[test]
    fn trajectory_file_guess() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("guess.csv");
        std::fs::write(&file, "t,x1,x2,u1,extra\n0,0,1,0,9\n1,1,1,2,9\n2,2,1,4,9\n").unwrap();
        let text = "problem = \"double_integrator\"\nnodes = 5\nguess_file = \"guess.csv\"\n";
        let spec = parse_config_str(text, dir.path()).unwrap();
        let s = spec.initial_state().unwrap();
        let xs: Vec<f64> = s.x.iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(s.u[3][0], 3.0);

        let both = format!("{text}x_guess = [1.0]\n");
        assert!(parse_config_str(&both, dir.path()).is_err());
    }
}
