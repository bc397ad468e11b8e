use std::fmt;

use thiserror::Error;

/// Location of an offending cell in a delimited input, 1-based data row
/// (header excluded) and the column name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellLocation {
    pub row: usize,
    pub column: String,
}

impl fmt::Display for CellLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}, column '{}'", self.row, self.column)
    }
}

#[derive(Debug, Error)]
pub enum DprError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required column '{0}'")]
    MissingColumn(String),

    #[error("duplicate observation for entity '{entity}', period '{period}' ({location})")]
    DuplicateObservation {
        entity: String,
        period: String,
        location: CellLocation,
    },

    #[error("non-numeric value '{value}' at {location}")]
    NonNumeric { value: String, location: CellLocation },

    #[error("negative value {value} at {location}")]
    NegativeValue { value: f64, location: CellLocation },

    #[error("no emission factor for feature '{0}'")]
    MissingFactor(String),

    #[error("value {value} plus log offset {offset} is not positive (entity '{entity}', period '{period}')")]
    NonPositiveLog {
        value: f64,
        offset: f64,
        entity: String,
        period: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("coordinate descent did not converge after {iterations} sweeps (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<DprError>,
    },
}

impl DprError {
    /// True for solver-side failures (singular systems, non-convergence),
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            DprError::RankDeficient(_) | DprError::NotConverged { .. } => true,
            DprError::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> DprError {
        DprError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, DprError>;
