//! Macroscopic traffic side models: interval count ingest, flow regressions,
//! density-based level of service and closed-form V2V/V2I capacity.

mod capacity;
mod ingest;
mod los;
mod regression;

pub use capacity::{
    aggregate_capacity, theoretical_capacity, CapacityParams, DEFAULT_PER_VEHICLE_RATE_MBPS,
};
pub use ingest::{ingest_counts, FlowSeries, IngestReport, MalformedRow};
pub use los::{classify_los, LosBand, LosGrade, LOS_TABLE};
pub use regression::{
    fit_linear, fit_linear_values, fit_multivariate, fit_multivariate_values, write_regression_rows, MvRegressionModel, Predict,
    RegressionModel,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("no data rows in input")]
    EmptyInput,
    #[error("timestamps not strictly increasing in flow {0}")]
    NonMonotonicTimestamps(String),
    #[error("row {0}: timestamp step does not match interval_minutes")]
    IntervalMismatch(usize),
    #[error("series lengths or timestamps differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("predictor has zero variance")]
    DegenerateInput,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("model expects {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("density must be a non-negative number, got {0}")]
    NegativeDensity(f64),
    #[error("invalid capacity parameter: {0}")]
    InvalidParams(&'static str),
    #[error("d = {d} m does not exceed 2*r_I = {two_ri} m; relay term is undefined")]
    DomainError { d: f64, two_ri: f64 },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for TrafficError {
    fn from(e: csv::Error) -> Self {
        TrafficError::Csv(e.to_string())
    }
}
