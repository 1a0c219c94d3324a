//! Paired and group hypothesis tests, effect sizes and comparison reports.

pub mod dist;
mod hypothesis;
mod ratings;
mod report;

use thiserror::Error;

pub use hypothesis::{
    bonferroni, cohens_d, kruskal_wallis, paired_t, paired_t_with, EffectSizeMode, PairedSample, TestResult,
};
pub use ratings::{
    compare_ratings, read_ratings_csv, RatingRecord, RatingScale, RatingSource, RatingsReport, SUBSCALES,
};
pub use report::{compare_corpora, identity_pairing, significance_stars, ComparisonReport, ReportRow, RowFlag};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {ids} ids, {a} values in a, {b} values in b")]
    LengthMismatch { ids: usize, a: usize, b: usize },
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("sample contains non-finite values")]
    NonFinite,
    #[error("zero variance: statistic undefined")]
    DegenerateSample,
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("need at least 3 observations, got {0}")]
    TooFewObservations(usize),
    #[error("all observations are tied")]
    AllTied,
    #[error("comparison count {m} invalid for {len} p-values")]
    ComparisonCount { m: usize, len: usize },
    #[error("p-value {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("pairing ids missing from corpora: {}", .0.join(", "))]
    Pairing(Vec<String>),
    #[error("no complete rating pairs")]
    NoPairs,
    #[error("invalid rating record at line {line}: {message}")]
    InvalidRating { line: usize, message: String },
}
