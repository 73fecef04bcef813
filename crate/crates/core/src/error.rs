use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("non-finite output from {callback}{}", node_suffix(*.node))]
    Evaluation {
        callback: String,
        node: Option<usize>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ill-conditioned transition matrix at node {node} (condition estimate {cond:.3e})")]
    IllConditionedTransition { node: usize, cond: f64 },

    #[error("multiplier system is singular (condition estimate {cond:.3e}); controllability lost")]
    Controllability { cond: f64 },

    #[error("no active set satisfies both multiplier sign and descent conditions")]
    DegenerateActiveSet,

    #[error("step size underflow at tau = {tau}: h = {h:.3e}, error norm {err:.3e}")]
    StepFailure { tau: f64, h: f64, err: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn node_suffix(node: Option<usize>) -> String {
    match node {
        Some(i) => format!(" at node {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn shape(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Shape {
            what: what.into(),
            expected,
            got,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Attach a pipeline stage label.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Attach a node index to an evaluation error that does not carry one yet.
    pub(crate) fn at_node(self, index: usize) -> Self {
        match self {
            Error::Evaluation {
                callback,
                node: None,
            } => Error::Evaluation {
                callback,
                node: Some(index),
            },
            other => other,
        }
    }

    /// Innermost error, with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status for the batch front end.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
