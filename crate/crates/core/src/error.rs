use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error category used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad configuration or arguments.
    Usage,
    /// Input data failed validation or parsing.
    Data,
    /// An estimator failed (non-convergence, degenerate problem).
    Estimation,
}

#[derive(Debug, Error)]
pub enum Error {
    // ----- ephemeris / calendar -----
    #[error("year {0} outside supported range 1900-2100")]
    YearOutOfRange(i32),
    #[error("julian date {0} outside supported range 1900-2100")]
    JulianDateOutOfRange(f64),
    #[error("term order {0} outside 1..=24")]
    BadTermOrder(u8),
    #[error("window radius {0} outside 0..=2")]
    BadRadius(u32),
    #[error(
        "no crossing of longitude {target}\u{b0} bracketed for term {order} of {year}; \
         this signals an ephemeris bug"
    )]
    RootBracketing { year: i32, order: u8, target: f64 },
    #[error(
        "windows of terms {first} and {second} both contain trading day {date} at radius {radius}"
    )]
    WindowOverlap {
        date: NaiveDate,
        first: u8,
        second: u8,
        radius: u32,
    },

    // ----- ingest -----
    #[error("column {0:?} not found in CSV header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse date {value:?} with format {format:?}")]
    BadDate {
        row: usize,
        value: String,
        format: String,
    },
    #[error("row {row}: cannot parse number {value:?}")]
    BadNumber { row: usize, value: String },
    #[error("row {row}: non-positive price {value}")]
    NonPositivePrice { row: usize, value: f64 },
    #[error("dates not strictly increasing at {date} (row {row}); refusing to sort silently")]
    UnorderedDates { row: usize, date: NaiveDate },
    #[error("series too short: need at least {need} rows, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("no term events supplied for labeling")]
    EmptyLabelSet,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    // ----- statistics -----
    #[error("sample has zero variance; {0} undefined")]
    ZeroVariance(&'static str),
    #[error("sample size {got} outside supported range {min}..={max}")]
    SampleSize { got: usize, min: usize, max: usize },
    #[error("need more observations than columns: n={n}, k={k}")]
    TooFewObservations { n: usize, k: usize },
    #[error("design matrix is rank deficient; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("perfect collinearity: column {0:?} is explained exactly by the others")]
    PerfectCollinearity(String),
    #[error("leverage is 1 at row {0}; HC3 weights undefined")]
    LeverageOne(usize),
    #[error("reference term {0} has no observations")]
    EmptyReference(u8),
    #[error("term-day label mode required for this analysis")]
    NotTermDayMode,
    #[error("window label mode required for this analysis")]
    NotWindowMode,
    #[error("parameter out of domain: {0}")]
    BadParameter(String),
    #[error("optimizer did not converge after {restarts} restarts (best loglik {best_loglik})")]
    NonConvergence { restarts: usize, best_loglik: f64 },

    // ----- pipeline -----
    #[error("analysis {analysis}: {source}")]
    Analysis {
        analysis: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Config(_) | BadRadius(_) | BadTermOrder(_) => ErrorCategory::Usage,
            YearOutOfRange(_) | JulianDateOutOfRange(_) | MissingColumn(_) | BadDate { .. }
            | BadNumber { .. } | NonPositivePrice { .. } | UnorderedDates { .. }
            | SeriesTooShort { .. } | EmptyLabelSet | Csv(_) | Io(_) | Json(_) => {
                ErrorCategory::Data
            }
            Analysis { source, .. } => source.category(),
            _ => ErrorCategory::Estimation,
        }
    }

    /// Wraps an error with the name of the pipeline analysis it came from.
    pub fn in_analysis(self, analysis: &'static str) -> Error {
        Error::Analysis {
            analysis,
            source: Box::new(self),
        }
    }
}
