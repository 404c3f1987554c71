use thiserror::Error;

/// Errors raised by the numeric and dynamical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("zero polynomial has no roots")]
    ZeroPolynomial,
    #[error("root iteration did not converge (worst scaled residual {residual:.3e})")]
    NonConvergence { residual: f64 },
    #[error("map degree {degree} is below the required minimum {required}")]
    DegreeTooLow { degree: usize, required: usize },
    #[error("expected a map of degree {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("numerator and denominator share a root near {re}+{im}i")]
    CommonFactor { re: f64, im: f64 },
    #[error("numerator and denominator both vanish at the evaluation point")]
    Indeterminate,
    #[error("Mobius map is degenerate (ad - bc = 0)")]
    DegenerateMobius,
    #[error("division by (z - w) left a relative remainder of {remainder:.3e}")]
    InexactDivision { remainder: f64 },
    #[error("fiber polynomial vanishes identically over the base point")]
    FiberDegenerate { path: Vec<usize> },
    #[error("resultant of the graph polynomial and its derivative vanishes identically")]
    DiscriminantDegenerate,
    #[error("interpolated polynomial of size {size} exceeds degree bound {bound}")]
    DegreeBoundExceeded { size: usize, bound: usize },
    #[error("bivariate interpolation is ill-conditioned (estimate {estimate:.3e})")]
    InterpolationIllConditioned { estimate: f64 },
    #[error("graph composition requires direct single-component factors")]
    NotDirect,
    #[error("parameter a must differ from 1")]
    BadParameter,
    #[error("Mobius map is not an involution")]
    NotAnInvolution,
    #[error("branch through the fixed point cannot be followed by continuity")]
    BranchAmbiguity,
    #[error("work of {needed} exceeds budget {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("seed {re}+{im}i is exceptional: {reason}")]
    ExceptionalStart { re: f64, im: f64, reason: String },
    #[error("orbit tuples carry no component labels")]
    MissingLabels,
    #[error("slope fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
