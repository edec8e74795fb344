use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample too small: need at least {needed} observations, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("non-finite input at index {index}")]
    NonFiniteInput { index: usize },

    #[error("length mismatch: {left} != {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate variable `{0}`: embedding has no variation")]
    DegenerateVariable(String),

    #[error("Fisher information is zero or negative; variance bound undefined")]
    SingularInformation,

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("underdetermined model: {n} observations for {p} predictors")]
    Underdetermined { n: usize, p: usize },

    #[error("non-positive or non-finite variance at observation {index}")]
    NonPositiveVariance { index: usize },

    #[error("singular instruments: {0}")]
    SingularInstruments(String),

    #[error("underidentified: {instruments} instruments for {regressors} regressors")]
    Underidentified { instruments: usize, regressors: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;
