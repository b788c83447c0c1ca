use thiserror::Error;

/// Errors raised by mesh construction, assembly and minimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate element {element}: measure {measure:e}")]
    DegenerateElement { element: usize, measure: f64 },

    #[error("free node {node} has an empty patch")]
    IsolatedNode { node: usize },

    #[error("inadmissible state: {0}")]
    Inadmissible(String),

    #[error("inadmissible state while perturbing dof {dof}")]
    InadmissibleDof { dof: usize },

    #[error("invalid start: energy at the initial point is {0}")]
    InvalidStart(f64),

    #[error("stagnation after {iters} iterations: {reason}")]
    Stagnation { iters: usize, reason: String },

    #[error("load step {step}: {source}")]
    LoadStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
