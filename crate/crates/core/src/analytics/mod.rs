//! Correlations, correlation matrices, distributions, discrepancy and
//! extremes reports, and the valence/arousal profile.

mod figures;
mod matrix;
mod reports;
mod stats;

pub use figures::{
    default_quadrant_rules, fit_quadratic, histogram, valence_arousal_profile, HistBin, Histogram,
    ProfileBin, ProfileOptions, QuadrantHit, QuadrantRule, Quadratic, ValenceArousalProfile,
    DEFAULT_BIN_WIDTH,
};
pub use matrix::{compare, correlation_matrix, MatrixReport, ScoreKind, ScoreTable};
pub use reports::{
    discrepancy_report, extremes, subset_correlation, Direction, Discrepancy, DiscrepancyDirection,
    DiscrepancyReport,
};
pub use stats::{pearson, spearman, StatsError};
