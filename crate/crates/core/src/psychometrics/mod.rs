//! Reliability, correlation, descriptive and baseline statistics over scored
//! questionnaire administrations.
//!
//! The unit of analysis is one administration: one questionnaire sample at
//! one round of one conversation. Coarser groupings are obtained with
//! [`AdministrationFilter`] or by aggregating [`ConstructScores`].

mod baseline;
mod correlation;
pub mod export;
mod matrix;
mod report;
mod stats;
mod trajectory;

use thiserror::Error;

pub use baseline::{compare_to_baseline, BaselineEntry, BaselineTable, ComparisonRow, COMPARISON_SCALE};
pub use correlation::{correlation_matrix, CorrelationMatrix, UndefinedCell};
pub use matrix::{AdministrationFilter, ConstructScores, ResponseMatrix, ResponseSet, RowMeta, ScoredAdministration};
pub use report::{analyze, AnalysisOptions, AnalysisReport, BaselineRound, DescriptiveRow, ReliabilityRow};
pub use stats::{cronbach_alpha, cronbach_alpha_with, descriptives, pearson, quantile, Descriptives, VarianceConvention};
pub use trajectory::{intention_trajectory, ConversationMean, Trajectory, TrajectoryPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("at least 2 items are required, got {0}")]
    TooFewItems(usize),
    #[error("at least 2 rows are required, got {0}")]
    TooFewRows(usize),
    #[error("total score variance is zero")]
    ZeroTotalVariance,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation is undefined for a constant series")]
    ConstantSeries,
    #[error("empty series")]
    Empty,
    #[error("matrix is not rectangular")]
    NotRectangular,
    #[error("unknown construct `{0}`")]
    UnknownConstruct(String),
    #[error("no baseline entry for construct `{0}`")]
    MissingBaseline(String),
    #[error("construct `{construct}` is on a {min}-{max} scale; comparisons require 1-7")]
    ScaleMismatch { construct: String, min: i64, max: i64 },
    #[error("no administrations match the selection")]
    EmptySelection,
    #[error("baseline table: {0}")]
    Baseline(String),
    #[error("instrument: {0}")]
    Instrument(String),
    #[error("export failed: {0}")]
    Export(String),
}
