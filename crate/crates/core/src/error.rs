use thiserror::Error;

/// Errors produced by model construction, simulation, estimation and I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {value} outside the observation window [0, {upper}]")]
    OutOfWindow { value: f64, upper: f64 },

    #[error("age {age} outside the range ({lo}, {hi}] of segment {segment}")]
    AgeOutOfSegment {
        segment: usize,
        age: f64,
        lo: f64,
        hi: f64,
    },

    #[error("segment {segment} has zero age slope; the effective age process is degenerate there")]
    DegenerateAge { segment: usize },

    #[error("intensity needs a hazard-function baseline; a cumulative step baseline has no pointwise rate")]
    StepBaselineIntensity,

    #[error("non-finite hazard at calendar time {time}")]
    NonFiniteHazard { time: f64 },

    #[error(
        "unit exceeded {limit} events before the end of observation; \
         the parameter combination is numerically explosive ({detail})"
    )]
    Explosive { limit: usize, detail: String },

    #[error("empty risk set at effective age {age}")]
    EmptyRiskSet { age: f64 },

    #[error("Hessian is singular at the current iterate")]
    SingularHessian,

    #[error(
        "covariance estimate is singular (condition number {condition:e}); \
         check the model for collinear covariates or unidentified parameters"
    )]
    SingularCovariance { condition: f64 },

    #[error("eta is not identified: kappa does not depend on {0}")]
    DegenerateEta(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
