use std::fmt;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Evaluation point outside [0, pi].
    OutOfDomain { x: f64 },
    /// Potential data violates a structural invariant (ordering, finiteness, class tag).
    InvalidPotential(String),
    /// Two potentials cannot be combined (different backgrounds or signs).
    IncompatibleDomains(String),
    /// Perturbation anchors supplied out of order.
    AnchorsOutOfOrder(String),
    /// An iterative routine failed to converge.
    NonConvergence(String),
    /// Finite-difference grid too coarse for the requested number of eigenvalues.
    GridTooCoarse { grid: usize, requested: usize },
    /// u2^2 - u1^2 changed sign more than twice; contradicts the two-crossing
    /// property and flags a solver bug.
    TooManyCrossings { count: usize },
    /// Eigenfunction zero count disagrees with the eigenvalue index.
    OscillationMismatch { index: usize, zeros: usize },
    /// Divergent potential too singular for the truncation machinery.
    NotIntegrable(String),
    /// Bad user-supplied input (CLI flags, JSON files).
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfDomain { x } => write!(f, "abscissa {x} outside [0, pi]"),
            Error::InvalidPotential(msg) => write!(f, "invalid potential: {msg}"),
            Error::IncompatibleDomains(msg) => write!(f, "incompatible potentials: {msg}"),
            Error::AnchorsOutOfOrder(msg) => write!(f, "anchors out of order: {msg}"),
            Error::NonConvergence(msg) => write!(f, "did not converge: {msg}"),
            Error::GridTooCoarse { grid, requested } => {
                write!(f, "grid of {grid} panels too coarse for {requested} eigenvalues")
            }
            Error::TooManyCrossings { count } => {
                write!(f, "u2^2 - u1^2 has {count} sign changes, expected at most 2")
            }
            Error::OscillationMismatch { index, zeros } => {
                write!(f, "eigenfunction {index} has {zeros} interior zeros, expected {}", index - 1)
            }
            Error::NotIntegrable(msg) => write!(f, "potential not integrable: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
