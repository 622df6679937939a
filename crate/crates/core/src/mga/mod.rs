//! Modelling to generate alternatives on top of the energy-system cost model.
//!
//! Groups of technologies are pushed up or down by weight vectors while the
//! system cost stays within a slack of its optimum. A small cost term in the
//! objective keeps every returned point off the weakly optimal part of the face.

mod groups;
mod solve;
mod weights;

pub use groups::{benchmark_groups, construct_groups};
pub use solve::{
    generate_all, group_terms, mga_solve, solve_near_optimal, Alternative, CostOptimum, GenerationReport,
    NearOptimal, Provenance, RunRecord, RunStatus,
};
pub use weights::build_weight_vectors;

use crate::attributes::CatalogError;
use crate::esm::EsmError;
use crate::lp::{LpError, LpStatus};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MgaError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Esm(#[from] EsmError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("slack must be non-negative, got {0}")]
    NegativeSlack(f64),
    #[error("the slack list is empty")]
    NoSlacks,
    #[error("optimal cost must be positive to normalise the slack row, got {0}")]
    NonPositiveOptimum(f64),
    #[error("solve ended {0:?}")]
    NotOptimal(LpStatus),
    #[error("weight vector references unknown group `{0}`")]
    UnknownGroup(String),
    #[error("cannot read MGA configuration: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed MGA configuration: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, JsonSchema, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ContributionBased,
    DomainBalanced,
    Benchmark,
}

impl Strategy {
    pub fn tag(self) -> &'static str {
        match self {
            Strategy::ContributionBased => "cb",
            Strategy::DomainBalanced => "db",
            Strategy::Benchmark => "bm",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, JsonSchema, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Driver,
    Avoider,
    Benchmark,
}

impl GroupKind {
    pub fn tag(self) -> &'static str {
        match self {
            GroupKind::Driver => "driver",
            GroupKind::Avoider => "avoider",
            GroupKind::Benchmark => "benchmark",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, JsonSchema, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Generation,
    Capacity,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
pub struct MgaGroup {
    pub id: String,
    pub kind: GroupKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    pub dimension: Dimension,
    pub members: Vec<String>,
    pub strategy: Strategy,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, JsonSchema, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Extreme,
    MultiExtreme,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
pub struct WeightVector {
    pub id: String,
    pub scheme: Scheme,
    pub direction: String,
    /// Non-zero weights by group id.
    pub weights: Vec<(String, f64)>,
}

impl WeightVector {
    /// Extreme vectors carry one entry, multi-extreme vectors two of opposite sign.
    pub fn is_valid(&self) -> bool {
        let unit = self.weights.iter().all(|(_, w)| w.abs() == 1.0);
        unit && match self.scheme {
            Scheme::Extreme => self.weights.len() == 1,
            Scheme::MultiExtreme => self.weights.len() == 2 && self.weights[0].1 == -self.weights[1].1,
        }
    }
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::ContributionBased, Strategy::DomainBalanced]
}
fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Extreme, Scheme::MultiExtreme]
}
fn default_slacks() -> Vec<f64> {
    vec![0.01, 0.05, 0.10, 0.20, 0.30]
}
fn default_true() -> bool {
    true
}
fn default_rho() -> f64 {
    1e-4
}
fn default_relevance() -> f64 {
    0.2
}
fn default_domain() -> f64 {
    0.4
}
fn default_tie() -> f64 {
    0.01
}
fn default_min_avoider() -> usize {
    3
}
fn default_artefact() -> f64 {
    1.5
}

/// Contents of `mga-config.json`. Every field has a default.
#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
pub struct MgaConfig {
    /// Attribute-based strategies to build groups with.
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    /// Add one technology-benchmark group per technology.
    #[serde(default = "default_true")]
    pub benchmark: bool,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// Relative cost slacks, e.g. 0.05 for 5%.
    #[serde(default = "default_slacks")]
    pub slacks: Vec<f64>,
    /// Weight of the normalised cost in the MGA objective.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Share of total demand a group must be able to cover.
    #[serde(default = "default_relevance")]
    pub relevance_threshold: f64,
    /// Share of sector demand for domain-balanced groups in `domain_threshold_sectors`.
    #[serde(default = "default_domain")]
    pub domain_threshold: f64,
    #[serde(default)]
    pub domain_threshold_sectors: Vec<String>,
    /// Relative difference below which contributions count as tied.
    #[serde(default = "default_tie")]
    pub tie_tolerance: f64,
    #[serde(default = "default_min_avoider")]
    pub min_contributors_for_avoider: usize,
    /// Flag runs whose capacity exceeds this multiple of what their generation needs.
    #[serde(default = "default_artefact")]
    pub capacity_artefact_factor: f64,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

impl Default for MgaConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl MgaConfig {
    pub fn load(path: &Path) -> Result<Self, MgaError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
