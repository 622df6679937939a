//! Preference models and the analyses that run on top of stakeholder rankings.

mod aggregate;
mod analysis;
mod prefs;
mod value;

pub use aggregate::{aggregate, kendall_tau_distance, rank, score, RankEntry, Ranking};
pub use analysis::{
    classify_technologies, cluster_stakeholders, occurrence_frequency, sensitivity, spearman, Classification,
    Dendrogram, GenerationRange, Merge, Perturbation, SensitivityRow, TechClass, TechnologyClass,
};
pub use prefs::{swing_weights, MidpointInput, PreferenceSet, StakeholderInput, StakeholderPreferences, DEFAULT_GAMMA};
pub use value::{exponential, fit_savf, Midpoint, Shape, ValueFunction};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MavtError {
    #[error("aggregation curvature must be finite and non-negative, got {0}")]
    InvalidGamma(f64),
    #[error("single-attribute value {0} is negative")]
    NegativeValue(f64),
    #[error("weights must be non-negative and sum to 1, sum is {0}")]
    WeightsNotNormalised(f64),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("no value function for attribute `{0}`")]
    MissingValueFunction(String),
    #[error("rating {rating} for `{attribute}` is outside [0, 100]")]
    RatingOutOfRange { attribute: String, rating: f64 },
    #[error("all ratings are zero")]
    AllRatingsZero,
    #[error("the most important attribute must be rated 100, highest rating is {0}")]
    NoReferenceRating(f64),
    #[error("value function range is degenerate: worst {worst}, best {best}")]
    DegenerateRange { worst: f64, best: f64 },
    #[error("midpoint (state {state}, value {value}) is not strictly inside the range")]
    MidpointOutOfRange { state: f64, value: f64 },
    #[error("midpoints are not monotone")]
    NonMonotone,
    #[error("no exponential curvature reproduces the midpoint")]
    CurvatureOutOfRange,
    #[error("top fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("top fraction {q} of {n} alternatives selects nothing")]
    EmptyTopSet { q: f64, n: usize },
    #[error("ranking of `{0}` covers a different set of alternatives")]
    MismatchedAlternatives(String),
    #[error("nothing to rank")]
    NoProfiles,
    #[error("need at least {needed} rankings, got {got}")]
    TooFewRankings { needed: usize, got: usize },
    #[error("ranking refers to unknown alternative `{0}`")]
    UnknownAlternative(String),
    #[error("cannot read preferences: {0}")]
    Io(String),
    #[error("malformed preferences: {0}")]
    Json(String),
}
