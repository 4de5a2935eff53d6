use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mass spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid lattice spacetime: {0}")]
    InvalidSpacetime(String),
    #[error("masses {0} and {1} have coinciding lattice frequencies")]
    MassCollision(f64, f64),
    #[error("interval is empty")]
    EmptyInterval,
    #[error("interval of length {len} covers the whole circle of {n_sites} sites")]
    IntervalWrapsWholeCircle { len: usize, n_sites: usize },
    #[error("region components are not causally disjoint: {0}")]
    ComponentsNotDisjoint(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("solutions live on different spacetimes")]
    SpacetimeMismatch,
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("point ({t}, {x}) outside the lattice")]
    OutOfRange { t: i64, x: i64 },
    #[error("algebra elements live over different phase spaces")]
    SpaceMismatch,
    #[error("map is not symplectic (residual {0:e})")]
    NotSymplectic(f64),
    #[error("map does not commute with conjugation (residual {0:e})")]
    NotReal(f64),
    #[error("degree {degree} exceeds cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },
    #[error("gauge element spectrum does not match")]
    SpectrumMismatch,
    #[error("block for mass {mass} is not orthogonal (residual {residual:e})")]
    NotOrthogonal { mass: f64, residual: f64 },
    #[error("spectrum has no massless species")]
    NoMasslessSpecies,
    #[error("mass {0} is not in the spectrum")]
    MassNotInSpectrum(f64),
    #[error("massless input has nonzero charge {0:e}")]
    NotChargeZero(f64),
    #[error("field family '{0}' is not linear in its test function")]
    NotLinearFamily(String),
    #[error("dense linear algebra budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("constraint rank has not plateaued: {0}")]
    InsufficientSamples(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("json error: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Json(err.to_string())
    }
}
