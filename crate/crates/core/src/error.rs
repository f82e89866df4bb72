use chrono::NaiveDateTime;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Fit,
}

#[derive(Debug, Error)]
pub enum Error {
    // ingestion and preprocessing
    #[error("line {line}: malformed timestamp {value:?}")]
    MalformedTimestamp { line: usize, value: String },
    #[error("line {line}: malformed kWh value {value:?}")]
    MalformedValue { line: usize, value: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(NaiveDateTime),
    #[error("timestamp {0} is not on the {1} grid")]
    CadenceViolation(NaiveDateTime, &'static str),
    #[error("series is empty")]
    EmptySeries,
    #[error("series {0} has a missing reading at its {1} end; nothing to interpolate from")]
    EdgeMissing(String, &'static str),
    #[error("missing fraction {fraction:.4} exceeds bound {bound:.4}")]
    TooManyMissing { fraction: f64, bound: f64 },
    #[error("reading {index} is nonpositive ({value})")]
    NonPositive { index: usize, value: f64 },
    #[error("series contains missing readings; run clean first")]
    NotClean,
    #[error("partial day: {0}")]
    PartialDay(String),
    #[error("split boundary {0} is outside the series span or off-grid")]
    BadBoundary(NaiveDateTime),
    #[error("granularity mismatch: {0}")]
    GranularityMismatch(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    // models
    #[error("seasonal bin {0} has no training readings")]
    EmptyBin(usize),
    #[error("too few rows: need at least {need}, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("sequence of length {len} too short for {what}")]
    SequenceTooShort { len: usize, what: String },
    #[error("invalid ARIMA spec: {0}")]
    InvalidArimaSpec(String),
    #[error("CSS objective is not finite at any starting point")]
    ObjectiveNotFinite,
    #[error("forecast recursion diverged at step {0}")]
    ForecastDiverged(usize),

    // measures
    #[error("forecast run is empty")]
    EmptyRun,
    #[error("observed value at {index} must be positive, got {value}")]
    NonPositiveObserved { index: usize, value: f64 },
    #[error("measure requires baseline predictions")]
    MissingBaseline,
    #[error("improvements have zero volatility; dominance over the baseline is exact")]
    ZeroVolatility,
    #[error("invalid application profile {name:?}: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("total compute cost must be positive")]
    ZeroCost,

    // harness
    #[error("invalid backtest plan: {0}")]
    InvalidPlan(String),
    #[error("insufficient history: origin at interval {origin} needs {need} intervals")]
    InsufficientHistory { origin: usize, need: usize },
    #[error("evaluation mask selects no intervals")]
    EmptyMask,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            EmptyBin(_)
            | TooFewRows { .. }
            | InvalidArimaSpec(_)
            | ObjectiveNotFinite
            | ForecastDiverged(_)
            | SequenceTooShort { .. }
            | InsufficientHistory { .. } => ErrorClass::Fit,
            InvalidProfile { .. }
            | InvalidPlan(_)
            | InvalidSpec(_)
            | Config(_)
            | UnknownProfile(_)
            | EmptyMask => ErrorClass::Config,
            _ => ErrorClass::Data,
        }
    }
}
