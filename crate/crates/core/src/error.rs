use thiserror::Error;

use crate::arith::ArithError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("degenerate term: {0}")]
    DegenerateTerm(String),
    #[error("no integration variables")]
    NoIntegrationVariables,
    #[error("index {index} out of range 0..={max}")]
    IndexError { index: usize, max: usize },
    #[error("no telescoper with order <= {lmax} and degree <= {degmax}")]
    NotFound { lmax: usize, degmax: usize },
    #[error("boundary term at {0} is not provably vanishing and cannot be evaluated")]
    UnboundedBoundaryTerm(String),
    #[error("every coefficient is divisible by ep; rescale the equation first")]
    RescaleRequired,
    #[error("singular obstruction: {0}")]
    SingularObstruction(String),
    #[error("initial values do not determine the solution: {0}")]
    UnderdeterminedInit(String),
    #[error("initial values are inconsistent: {0}")]
    InconsistentInit(String),
    #[error("integral diverges: {0}")]
    DivergentIntegral(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("not hyperexponential: {0}")]
    NonHyperexponential(String),
    #[error("at node {path:?}: {source}")]
    AtNode { path: Vec<usize>, source: Box<Error> },
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    /// Innermost error, looking through node-path wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtNode { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
