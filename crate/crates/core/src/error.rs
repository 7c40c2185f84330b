use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frequency at A0 is {found}, not the resonance {p}/{q}")]
    NonResonant { p: i64, q: i64, found: String },
    #[error("frequency derivative vanishes at A0")]
    DegenerateFrequency,
    #[error("input is not real: {0}")]
    NotReal(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("order (k={k}, j={j}) requested before a lower order was solved")]
    MissingLowerOrder { k: usize, j: usize },
    #[error("series is not beta0-general up to order {0}")]
    NotGeneral(usize),
    #[error("truncation too small: {0}")]
    InsufficientTruncation(String),
    #[error("mean of the A-equation does not vanish at eta-order {k}: |value| = {magnitude:e}")]
    PeriodicityViolated { k: usize, magnitude: f64 },
    #[error("face-polynomial derivative at the simple root is too close to zero ({0:e})")]
    NearSingularC(f64),
    #[error("tree enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("tree with {lines} lines exceeds bound {bound} ({which})")]
    BoundViolated { lines: usize, bound: f64, which: String },
    #[error("shooting did not converge: {0}")]
    ShootingDiverged(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that mean the input system itself is unusable.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonResonant { .. } | Error::DegenerateFrequency | Error::NotReal(_) | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
