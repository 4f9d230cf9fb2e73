use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures raised by the algorithmic core.
///
/// File-level context (path, line, column) is attached by the IO layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A corpus invariant does not hold for one row of one table.
    InvalidRow { table: crate::corpus::Table, row: usize, column: Option<&'static str>, message: String },
    /// A lookup by content or recipe failed.
    UnknownStimulus { content_id: String, recipe_id: String },
    UnknownContent(String),
    /// A rating vector or other required collection is empty or too short.
    InsufficientData(String),
    /// A caller-supplied parameter is out of its domain.
    InvalidParameter(String),
    /// A stimulus VMAF lies outside every range of a decomposition.
    OutOfCoverage { vmaf: f64 },
    /// Fitting failed; the family is invalid for the range.
    Fit(String),
    /// A model requested for prediction does not exist or was rejected.
    MissingModel { range_id: String, family: String },
    /// Bisection found no detected index on the ladder.
    BeyondLadder,
    /// Wraps an error with the pair or stage it occurred in.
    Context { context: String, source: alloc::boxed::Box<Error> },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: alloc::boxed::Box::new(self) }
    }

    /// The innermost error, skipping any context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidRow { table, row, column, message } => {
                write!(f, "{table} row {row}")?;
                if let Some(col) = column {
                    write!(f, ", column {col}")?;
                }
                write!(f, ": {message}")
            }
            Error::UnknownStimulus { content_id, recipe_id } => {
                write!(f, "unknown stimulus {content_id}/{recipe_id}")
            }
            Error::UnknownContent(c) => write!(f, "unknown content {c}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::OutOfCoverage { vmaf } => write!(f, "vmaf {vmaf} is outside every range"),
            Error::Fit(msg) => write!(f, "fit failed: {msg}"),
            Error::MissingModel { range_id, family } => {
                write!(f, "no valid {family} model for range {range_id}")
            }
            Error::BeyondLadder => f.write_str("detector never fired on the ladder"),
            Error::Context { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl core::error::Error for Error {}
