use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("{}state {value} outside 1..=8", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    StateOutOfRange { value: i64, line: Option<usize> },

    #[error("line {line}: pump {pump_id} day {day} does not follow day {previous_day} (line {previous_line})")]
    NonMonotoneDays { pump_id: String, line: usize, day: u32, previous_line: usize, previous_day: u32 },

    #[error("pump {pump_id}: covariate series does not cover days {start}..{end}")]
    MissingCovariates { pump_id: String, start: u32, end: u32 },

    #[error("pump {pump_id}: non-finite covariate on day {day}")]
    NonFiniteCovariate { pump_id: String, day: u32 },

    #[error("observation {row}: {msg}")]
    InvalidObservation { row: usize, msg: String },

    #[error("unexpected header, expected {expected}")]
    Header { expected: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window of length {len} is too short; at least {min} values are required")]
    WindowTooShort { len: usize, min: usize },

    #[error("non-finite value at position {index} of the window")]
    NonFinite { index: usize },

    #[error("pump {pump_id}: series covers days {first}..={last}, window needs {start}..={end}")]
    InsufficientSeries { pump_id: String, first: u32, last: u32, start: u32, end: u32 },

    #[error("unknown feature name '{0}'")]
    UnknownFeature(String),

    #[error("features CSV: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum GroupingError {
    #[error("pump {0} has a random-effect estimate but no feature row")]
    MissingFeatures(String),

    #[error("pump {0} has a feature row but no random-effect estimate")]
    MissingEstimate(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum LingamError {
    #[error("need more than {min} rows, got {rows}")]
    TooFewRows { rows: usize, min: usize },

    #[error("columns '{a}' and '{b}' are collinear (|corr| = {corr:.12})")]
    Collinear { a: String, b: String, corr: f64 },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("column '{0}' is constant")]
    ConstantColumn(String),

    #[error("target column '{0}' is constant")]
    ConstantTarget(String),

    #[error("non-finite value in column '{0}'")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Data(#[from] DataError),
}
