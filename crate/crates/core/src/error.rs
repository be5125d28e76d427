use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("TooFewPoints: need at least {min} observations, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("DegenerateRange: all observations are equal")]
    DegenerateRange,
    #[error("NonFinite: input contains a non-finite value")]
    NonFinite,
    #[error("NonPositiveForLog: log pre-transform requires strictly positive data")]
    NonPositiveForLog,
    #[error("OutOfRange: value {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error("GridTooSmall: grid size {got} is below the minimum of {min}")]
    GridTooSmall { got: usize, min: usize },
    #[error("BadBasisSize: number of basis functions {0} is outside the admissible range")]
    BadBasisSize(usize),
    #[error("EigFailure: symmetric eigensolver did not converge")]
    EigFailure,
    #[error("RankDeficient: expected {expected} positive eigenvalues, found {found}")]
    RankDeficient { expected: usize, found: usize },
    #[error("NonFiniteResult: {0}")]
    NonFiniteResult(&'static str),
    #[error("SliceStuck: slice sampler made no acceptance after {0} shrinkage steps")]
    SliceStuck(usize),
    #[error("DivergenceLimit: {divergent} of {total} post-warmup transitions diverged")]
    DivergenceLimit { divergent: usize, total: usize },
    #[error("TooFewDraws: need at least {min} draws, got {got}")]
    TooFewDraws { got: usize, min: usize },
    #[error("Parse: line {line}: cannot read `{content}` as a number")]
    Parse { line: usize, content: String },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Errors caused by the input data rather than numerics or configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::TooFewPoints { .. }
                | Error::DegenerateRange
                | Error::NonFinite
                | Error::NonPositiveForLog
                | Error::OutOfRange(_)
                | Error::Parse { .. }
        )
    }

    pub fn is_numeric_failure(&self) -> bool {
        matches!(
            self,
            Error::EigFailure
                | Error::RankDeficient { .. }
                | Error::NonFiniteResult(_)
                | Error::SliceStuck(_)
                | Error::DivergenceLimit { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
